//! Exact restricted isometry constants and the inequality checkers built
//! on them.
//!
//! `δ_k` is the largest deviation from 1 of any eigenvalue of any `k x k`
//! column Gram matrix. It is computed by visiting every `k`-subset; there
//! is no sampling fallback, a request beyond the budget is an error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{dot, gram_submatrix, norm2, sym_eigenvalues, DenseMatrix, NumericsError};
use crate::sparse_recovery::SparseSignal;
use crate::subsets::{binomial, Combinations};

/// Default cap on the number of subsets [`exact_ric`] will visit.
pub const DEFAULT_RIC_BUDGET: u128 = 5_000_000;

/// Default slack used by the inequality checkers.
pub const DEFAULT_CHECK_TOL: f64 = 1e-9;

const GRAM_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RicError {
    #[error("order {k} must be between 1 and {cols}")]
    InvalidOrder { k: usize, cols: usize },
    #[error("{count} subsets exceed the enumeration budget {budget}")]
    BudgetExceeded { count: u128, budget: u128 },
    #[error("supports overlap at index {index}")]
    OverlappingSupports { index: usize },
    #[error("signal is zero")]
    ZeroVector,
    #[error("signal support is not contained in the given index set")]
    SupportViolation,
    #[error("delta {delta} must be below 1")]
    DeltaTooLarge { delta: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, RicError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicReport {
    pub order: usize,
    pub delta: f64,
    /// First subset, in lexicographic order, attaining `delta`.
    pub witness_subset: Vec<usize>,
    /// Smallest Gram eigenvalue over all subsets.
    pub lambda_min: f64,
    /// Largest Gram eigenvalue over all subsets.
    pub lambda_max: f64,
    pub subsets_examined: u128,
}

/// Deviation of the Gram spectrum of `subset` from 1.
pub fn subset_deviation(a: &DenseMatrix, subset: &[usize]) -> Result<(f64, f64, f64)> {
    let eig = sym_eigenvalues(&gram_submatrix(a, subset)?, GRAM_SYMMETRY_TOL)?;
    let lo = eig[0];
    let hi = eig[eig.len() - 1];
    Ok(((hi - 1.0).max(1.0 - lo), lo, hi))
}

/// `δ_k(A)` by exhaustive enumeration of all `k`-column subsets.
pub fn exact_ric(a: &DenseMatrix, k: usize, budget: u128) -> Result<RicReport> {
    let n = a.cols();
    if k == 0 || k > n {
        return Err(RicError::InvalidOrder { k, cols: n });
    }
    let count = binomial(n, k);
    if count > budget {
        return Err(RicError::BudgetExceeded { count, budget });
    }
    let mut delta = f64::NEG_INFINITY;
    let mut witness = Vec::new();
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max = f64::NEG_INFINITY;
    for subset in Combinations::new(n, k) {
        let (dev, lo, hi) = subset_deviation(a, &subset)?;
        lambda_min = lambda_min.min(lo);
        lambda_max = lambda_max.max(hi);
        if dev > delta {
            delta = dev;
            witness = subset;
        }
    }
    Ok(RicReport {
        order: k,
        delta,
        witness_subset: witness,
        lambda_min,
        lambda_max,
        subsets_examined: count,
    })
}

/// `δ_k` for every `k` in `1..=k_max`.
pub fn ric_profile(a: &DenseMatrix, k_max: usize, budget: u128) -> Result<Vec<RicReport>> {
    (1..=k_max).map(|k| exact_ric(a, k, budget)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub name: String,
    pub reference: String,
    pub threshold: f64,
    pub strict: bool,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub delta_measured: f64,
    pub rows: Vec<ConditionRow>,
    /// `1/√(K+1)`: from here up, some matrix with this `δ_{K+1}` makes OMP fail.
    pub failure_threshold: f64,
    pub in_failure_region: bool,
    /// Strictly between the sharp sufficient bound and the failure threshold.
    pub in_gap: bool,
}

/// Largest `δ_{K+1}` for which OMP provably recovers every `K`-sparse signal.
pub fn sharp_threshold(k: usize) -> f64 {
    1.0 / ((k as f64).sqrt() + 1.0)
}

/// Smallest `δ_{K+1}` at which a matrix with a failing `K`-sparse signal exists.
pub fn failure_threshold(k: usize) -> f64 {
    1.0 / ((k as f64) + 1.0).sqrt()
}

fn row(name: &str, reference: &str, threshold: f64, strict: bool, delta: f64) -> ConditionRow {
    let satisfied = if strict {
        delta < threshold
    } else {
        delta <= threshold
    };
    ConditionRow {
        name: name.to_string(),
        reference: reference.to_string(),
        threshold,
        strict,
        satisfied,
    }
}

/// Compares a measured `δ_{K+1}` against the known OMP recovery thresholds.
pub fn evaluate_conditions(delta: f64, k: usize) -> ConditionReport {
    let rk = (k as f64).sqrt();
    let sharp = sharp_threshold(k);
    let fail = failure_threshold(k);
    ConditionReport {
        k,
        delta_measured: delta,
        rows: vec![
            row("delta <= 1/(sqrt(K)+1)", "sharp bound", sharp, false, delta),
            row(
                "delta < 1/(sqrt(K)+1)",
                "Mo-Shen 2012; Wang-Shim 2012",
                sharp,
                true,
                delta,
            ),
            row(
                "delta < 1/(3 sqrt(K))",
                "Davenport-Wakin 2010",
                1.0 / (3.0 * rk),
                true,
                delta,
            ),
            row(
                "delta < 1/((1+sqrt(2)) sqrt(K))",
                "Liu-Temlyakov 2010",
                1.0 / ((1.0 + std::f64::consts::SQRT_2) * rk),
                true,
                delta,
            ),
        ],
        failure_threshold: fail,
        in_failure_region: delta >= fail,
        in_gap: delta > sharp && delta < fail,
    }
}

fn unit(a: &DenseMatrix, x: &SparseSignal) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(RicError::ZeroVector);
    }
    if x.len() != a.cols() {
        return Err(RicError::DimensionMismatch {
            expected: a.cols(),
            actual: x.len(),
        });
    }
    let norm = x.norm2();
    Ok(x.to_dense().into_iter().map(|v| v / norm).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Check {
    /// `|⟨A x̄, A x̄′⟩|` on the normalized pair.
    pub inner: f64,
    pub bound_holds: bool,
    pub equality: bool,
    /// `‖A x̄‖² + ‖A x̄′‖²`.
    pub energy_sum: f64,
    /// Equality forces `energy_sum = 2`; vacuous when there is no equality.
    pub implication_holds: bool,
    /// `‖A(x̄ + x̄′)‖²`.
    pub plus_energy: f64,
    /// `‖A(x̄ − x̄′)‖²`.
    pub minus_energy: f64,
    /// `2(1−δ) ≤ ‖A(x̄ ± x̄′)‖² ≤ 2(1+δ)` for both signs.
    pub sum_bounds_hold: bool,
    /// `energy_sum = 2` without `inner = delta`: the reverse implication fails here.
    pub converse_counterexample: bool,
}

/// Checks the disjoint-support inner-product bound and its equality case.
///
/// Only the direction "equality ⇒ energy sum 2" is asserted; the reverse
/// direction is reported through `converse_counterexample`.
pub fn lemma1_forward_check(
    a: &DenseMatrix,
    x: &SparseSignal,
    xp: &SparseSignal,
    delta: f64,
    tol: f64,
) -> Result<Lemma1Check> {
    if let Some(&index) = x.support().iter().find(|i| xp.support().contains(i)) {
        return Err(RicError::OverlappingSupports { index });
    }
    let u = a.mul_vec(&unit(a, x)?)?;
    let v = a.mul_vec(&unit(a, xp)?)?;
    let inner = dot(&u, &v).abs();
    let energy_sum = dot(&u, &u) + dot(&v, &v);
    let plus: Vec<f64> = u.iter().zip(&v).map(|(p, q)| p + q).collect();
    let minus: Vec<f64> = u.iter().zip(&v).map(|(p, q)| p - q).collect();
    let plus_energy = dot(&plus, &plus);
    let minus_energy = dot(&minus, &minus);
    let within = |e: f64| e >= 2.0 * (1.0 - delta) - tol && e <= 2.0 * (1.0 + delta) + tol;
    let equality = (inner - delta).abs() <= tol;
    let energy_two = (energy_sum - 2.0).abs() <= tol;
    Ok(Lemma1Check {
        inner,
        bound_holds: inner <= delta + tol,
        equality,
        energy_sum,
        implication_holds: !equality || energy_two,
        plus_energy,
        minus_energy,
        sum_bounds_hold: within(plus_energy) && within(minus_energy),
        converse_counterexample: energy_two && !equality,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Check {
    /// `‖A_Sᵀ A_S x_S‖₂`.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Checks `(1−δ)‖x‖ ≤ ‖A_SᵀA_S x‖ ≤ (1+δ)‖x‖` for `x` supported in `S`.
pub fn lemma2_check(
    a: &DenseMatrix,
    s: &[usize],
    x: &SparseSignal,
    delta_s: f64,
    tol: f64,
) -> Result<Lemma2Check> {
    if delta_s >= 1.0 {
        return Err(RicError::DeltaTooLarge { delta: delta_s });
    }
    if x.len() != a.cols() {
        return Err(RicError::DimensionMismatch {
            expected: a.cols(),
            actual: x.len(),
        });
    }
    if !x.support().iter().all(|i| s.contains(i)) {
        return Err(RicError::SupportViolation);
    }
    let dense = x.to_dense();
    let xs: Vec<f64> = s.iter().map(|&i| dense[i]).collect();
    let sub = a.select_columns(s)?;
    let value = norm2(&sub.tr_mul_vec(&sub.mul_vec(&xs)?)?);
    let xn = x.norm2();
    let lower = (1.0 - delta_s) * xn;
    let upper = (1.0 + delta_s) * xn;
    Ok(Lemma2Check {
        value,
        lower,
        upper,
        lower_ok: value >= lower - tol,
        upper_ok: value <= upper + tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBound {
    /// `|⟨a_j, A x⟩|`.
    pub value: f64,
    /// `δ · ‖x‖₂`.
    pub bound: f64,
    pub holds: bool,
}

/// Checks `|⟨a_j, A x⟩| ≤ δ‖x‖₂` for a column `j` outside `supp(x)`.
pub fn coordinate_correlation_bound_check(
    a: &DenseMatrix,
    x: &SparseSignal,
    j: usize,
    delta: f64,
    tol: f64,
) -> Result<CorrelationBound> {
    if x.len() != a.cols() {
        return Err(RicError::DimensionMismatch {
            expected: a.cols(),
            actual: x.len(),
        });
    }
    if j >= a.cols() {
        return Err(NumericsError::IndexOutOfRange {
            index: j,
            len: a.cols(),
        }
        .into());
    }
    if x.support().contains(&j) {
        return Err(RicError::SupportViolation);
    }
    let ax = a.mul_vec(&x.to_dense())?;
    let value = dot(&a.column(j), &ax).abs();
    let bound = delta * x.norm2();
    Ok(CorrelationBound {
        value,
        bound,
        holds: value <= bound + tol,
    })
}
