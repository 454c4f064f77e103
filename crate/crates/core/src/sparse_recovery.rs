//! Orthogonal Matching Pursuit with per-iteration tracing, explicit
//! tie-breaking, and a brute-force ℓ0 reference solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, least_squares, norm2, DenseMatrix, NumericsError};
use crate::subsets::{binomial, Combinations};

/// Default relative tie tolerance on correlations.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Relative tolerance used by [`exact_recovery_check`].
pub const RECOVERY_TOL: f64 = 1e-8;

/// Residual threshold (relative to `‖y‖₂`) for the optional early stop.
pub const EARLY_STOP_TOL: f64 = 1e-12;

/// Default cap on the number of supports [`l0_oracle`] will enumerate.
pub const DEFAULT_L0_BUDGET: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecoveryError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("sparsity {k} exceeds the {cols} available columns")]
    SparsityTooLarge { k: usize, cols: usize },
    #[error("selected support {support:?} has numerically dependent columns")]
    RankDeficientSupport { support: Vec<usize> },
    #[error("adversarial tie-breaking needs the true support")]
    MissingTrueSupport,
    #[error("{count} supports exceed the enumeration budget {budget}")]
    BudgetExceeded { count: u128, budget: u128 },
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, RecoveryError>;

/// A vector of length `len` given by its support and the values on it.
///
/// Support indices are distinct, in range and kept sorted; values are
/// finite and nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    len: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSignal {
    pub fn new(len: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(RecoveryError::InvalidSignal(format!(
                "{} support indices but {} values",
                support.len(),
                values.len()
            )));
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(values).collect();
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(RecoveryError::InvalidSignal(format!(
                    "duplicate support index {}",
                    w[0].0
                )));
            }
        }
        for &(i, v) in &pairs {
            if i >= len {
                return Err(RecoveryError::InvalidSignal(format!(
                    "support index {i} out of range for length {len}"
                )));
            }
            if v == 0.0 || !v.is_finite() {
                return Err(RecoveryError::InvalidSignal(format!(
                    "value {v} at index {i} must be finite and nonzero"
                )));
            }
        }
        let (support, values) = pairs.into_iter().unzip();
        Ok(Self {
            len,
            support,
            values,
        })
    }

    /// Keeps the nonzero entries of a dense vector.
    pub fn from_dense(x: &[f64]) -> Result<Self> {
        let (support, values) = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        Self::new(x.len(), support, values)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_k_sparse(&self, k: usize) -> bool {
        self.support.len() <= k
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.len];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            x[i] = v;
        }
        x
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.len,
            self.support.clone(),
            self.values.iter().map(|v| v * c).collect(),
        )
    }
}

/// Rule for choosing among (near-)tied maximal correlations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    SmallestIndex,
    LargestIndex,
    /// Prefers a tied index outside the true support when there is one.
    Adversarial,
}

impl TiePolicy {
    pub const ALL: [TiePolicy; 3] = [
        TiePolicy::SmallestIndex,
        TiePolicy::LargestIndex,
        TiePolicy::Adversarial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TiePolicy::SmallestIndex => "smallest",
            TiePolicy::LargestIndex => "largest",
            TiePolicy::Adversarial => "adversarial",
        }
    }
}

impl std::str::FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "smallest" => Ok(TiePolicy::SmallestIndex),
            "largest" => Ok(TiePolicy::LargestIndex),
            "adversarial" => Ok(TiePolicy::Adversarial),
            other => Err(format!(
                "unknown tie policy '{other}' (expected smallest, largest or adversarial)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpOptions {
    pub policy: TiePolicy,
    pub tie_tol: f64,
    pub early_stop: bool,
    /// Needed by [`TiePolicy::Adversarial`], ignored otherwise.
    pub true_support: Option<Vec<usize>>,
}

impl Default for OmpOptions {
    fn default() -> Self {
        Self {
            policy: TiePolicy::SmallestIndex,
            tie_tol: DEFAULT_TIE_TOL,
            early_stop: false,
            true_support: None,
        }
    }
}

impl OmpOptions {
    pub fn with_policy(policy: TiePolicy) -> Self {
        Self {
            policy,
            ..Self::default()
        }
    }

    pub fn adversarial(true_support: &[usize]) -> Self {
        Self {
            policy: TiePolicy::Adversarial,
            true_support: Some(true_support.to_vec()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmpIteration {
    /// 1-based iteration number.
    pub k: usize,
    /// `|⟨r^{k-1}, a_j⟩|` for every column.
    pub correlations: Vec<f64>,
    pub selected: usize,
    pub tie: bool,
    /// Unselected indices within the tie tolerance of the maximum.
    pub tied: Vec<usize>,
    pub support_after: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmpTrace {
    pub n: usize,
    pub policy: TiePolicy,
    pub initial_residual_norm: f64,
    pub iterations: Vec<OmpIteration>,
    /// `T^K` in selection order.
    pub support: Vec<usize>,
    /// Least-squares coefficients on `support`, same order.
    pub coefficients: Vec<f64>,
    pub stopped_early: bool,
}

impl OmpTrace {
    pub fn selected(&self) -> Vec<usize> {
        self.iterations.iter().map(|it| it.selected).collect()
    }

    pub fn any_tie(&self) -> bool {
        self.iterations.iter().any(|it| it.tie)
    }

    pub fn estimate_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (&j, &v) in self.support.iter().zip(&self.coefficients) {
            x[j] = v;
        }
        x
    }

    /// Final estimate as a sparse signal; exact zeros are dropped.
    pub fn final_estimate(&self) -> SparseSignal {
        SparseSignal::from_dense(&self.estimate_dense())
            .expect("estimate entries come from a finite least-squares solve")
    }

    pub fn final_residual_norm(&self) -> f64 {
        self.iterations
            .last()
            .map_or(self.initial_residual_norm, |it| it.residual_norm)
    }
}

/// `|⟨r, a_j⟩|` for every column `a_j` of `a`.
pub fn correlations(a: &DenseMatrix, r: &[f64]) -> Result<Vec<f64>> {
    if r.len() != a.rows() {
        return Err(RecoveryError::DimensionMismatch {
            expected: a.rows(),
            actual: r.len(),
        });
    }
    Ok(a.tr_mul_vec(r)?.into_iter().map(f64::abs).collect())
}

fn pick(
    corr: &[f64],
    chosen: &[bool],
    policy: TiePolicy,
    tie_tol: f64,
    truth: Option<&[usize]>,
) -> (usize, Vec<usize>) {
    let max = corr
        .iter()
        .zip(chosen)
        .filter(|(_, c)| !**c)
        .fold(f64::NEG_INFINITY, |m, (v, _)| m.max(*v));
    let tied: Vec<usize> = (0..corr.len())
        .filter(|&j| !chosen[j] && max - corr[j] <= tie_tol * max)
        .collect();
    let selected = match policy {
        TiePolicy::SmallestIndex => tied[0],
        TiePolicy::LargestIndex => tied[tied.len() - 1],
        TiePolicy::Adversarial => {
            let truth = truth.unwrap_or(&[]);
            tied.iter()
                .copied()
                .find(|j| !truth.contains(j))
                .unwrap_or(tied[0])
        }
    };
    (selected, tied)
}

/// Runs `k` iterations of Orthogonal Matching Pursuit on `y ≈ A x`.
pub fn omp_run(a: &DenseMatrix, y: &[f64], k: usize, opts: &OmpOptions) -> Result<OmpTrace> {
    let n = a.cols();
    if y.len() != a.rows() {
        return Err(RecoveryError::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
        });
    }
    if k > n {
        return Err(RecoveryError::SparsityTooLarge { k, cols: n });
    }
    let truth = match opts.policy {
        TiePolicy::Adversarial => Some(
            opts.true_support
                .as_deref()
                .ok_or(RecoveryError::MissingTrueSupport)?,
        ),
        _ => None,
    };

    let y_norm = norm2(y);
    let mut residual = y.to_vec();
    let mut residual_norm = y_norm;
    let mut chosen = vec![false; n];
    let mut support = Vec::with_capacity(k);
    let mut coefficients = Vec::new();
    let mut iterations = Vec::with_capacity(k);
    let mut stopped_early = false;

    for iter in 1..=k {
        if opts.early_stop && residual_norm <= EARLY_STOP_TOL * y_norm {
            stopped_early = true;
            break;
        }
        let corr = correlations(a, &residual)?;
        let (selected, tied) = pick(&corr, &chosen, opts.policy, opts.tie_tol, truth);
        chosen[selected] = true;
        support.push(selected);

        let sub = a.select_columns(&support)?;
        coefficients = match least_squares(&sub, y) {
            Ok(z) => z,
            Err(NumericsError::RankDeficient { .. }) => {
                return Err(RecoveryError::RankDeficientSupport {
                    support: support.clone(),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let fit = sub.mul_vec(&coefficients)?;
        residual = y.iter().zip(&fit).map(|(yi, fi)| yi - fi).collect();
        residual_norm = norm2(&residual);

        iterations.push(OmpIteration {
            k: iter,
            correlations: corr,
            selected,
            tie: tied.len() > 1,
            tied,
            support_after: support.clone(),
            coefficients: coefficients.clone(),
            residual_norm,
        });
    }

    Ok(OmpTrace {
        n,
        policy: opts.policy,
        initial_residual_norm: y_norm,
        iterations,
        support,
        coefficients,
        stopped_early,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome {
    pub recovered: bool,
    pub max_value_error: f64,
    pub trace: OmpTrace,
}

/// Runs OMP on `y = A x` and reports whether `x` came back.
///
/// Recovery means `supp(x) ⊆ T^K` and every entry of the estimate is within
/// `1e-8 · max(1, ‖x‖₂)` of `x`.
pub fn exact_recovery_check(
    a: &DenseMatrix,
    x: &SparseSignal,
    k: usize,
    policy: TiePolicy,
) -> Result<RecoveryOutcome> {
    if x.is_empty() {
        return Err(RecoveryError::InvalidSignal(
            "the zero signal is not a valid recovery target".into(),
        ));
    }
    if !x.is_k_sparse(k) {
        return Err(RecoveryError::InvalidSignal(format!(
            "signal has {} nonzeros, more than K = {k}",
            x.support().len()
        )));
    }
    if x.len() != a.cols() {
        return Err(RecoveryError::DimensionMismatch {
            expected: a.cols(),
            actual: x.len(),
        });
    }
    let y = a.mul_vec(&x.to_dense())?;
    let mut opts = OmpOptions::with_policy(policy);
    if policy == TiePolicy::Adversarial {
        opts.true_support = Some(x.support().to_vec());
    }
    let trace = omp_run(a, &y, k, &opts)?;
    let estimate = trace.estimate_dense();
    let max_value_error = estimate
        .iter()
        .zip(x.to_dense())
        .fold(0.0f64, |m, (e, v)| m.max((e - v).abs()));
    let covered = x.support().iter().all(|i| trace.support.contains(i));
    let recovered = covered && max_value_error <= RECOVERY_TOL * x.norm2().max(1.0);
    Ok(RecoveryOutcome {
        recovered,
        max_value_error,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L0Solution {
    pub signal: SparseSignal,
    /// Minimizing support, ascending.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub supports_examined: u128,
    /// Supports whose columns were dependent.
    pub skipped: Vec<Vec<usize>>,
}

/// Best `k`-term fit of `y` by exhaustive search over all supports.
///
/// Supports are visited lexicographically and only a strictly smaller
/// residual replaces the incumbent, so ties go to the smallest support.
pub fn l0_oracle(a: &DenseMatrix, y: &[f64], k: usize, budget: u128) -> Result<L0Solution> {
    let n = a.cols();
    if y.len() != a.rows() {
        return Err(RecoveryError::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
        });
    }
    if k == 0 || k > n {
        return Err(RecoveryError::SparsityTooLarge { k, cols: n });
    }
    let count = binomial(n, k);
    if count > budget {
        return Err(RecoveryError::BudgetExceeded { count, budget });
    }

    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut skipped = Vec::new();
    for subset in Combinations::new(n, k) {
        let sub = a.select_columns(&subset)?;
        let z = match least_squares(&sub, y) {
            Ok(z) => z,
            Err(NumericsError::RankDeficient { .. }) => {
                skipped.push(subset);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let fit = sub.mul_vec(&z)?;
        let res = numerics::norm2(&y.iter().zip(&fit).map(|(a, b)| a - b).collect::<Vec<_>>());
        if best.as_ref().is_none_or(|(r, _, _)| res < *r) {
            best = Some((res, subset, z));
        }
    }
    let (residual_norm, support, coefficients) =
        best.ok_or_else(|| RecoveryError::RankDeficientSupport {
            support: Vec::new(),
        })?;
    let mut dense = vec![0.0; n];
    for (&j, &v) in support.iter().zip(&coefficients) {
        dense[j] = v;
    }
    Ok(L0Solution {
        signal: SparseSignal::from_dense(&dense)?,
        support,
        coefficients,
        residual_norm,
        supports_examined: count,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn signal_validation() {
        assert!(SparseSignal::new(3, vec![0, 0], vec![1.0, 2.0]).is_err());
        assert!(SparseSignal::new(3, vec![3], vec![1.0]).is_err());
        assert!(SparseSignal::new(3, vec![1], vec![0.0]).is_err());
        assert!(SparseSignal::new(3, vec![1], vec![]).is_err());
        let s = SparseSignal::new(4, vec![3, 1], vec![2.0, -1.0]).unwrap();
        assert_eq!(s.support(), &[1, 3]);
        assert_eq!(s.values(), &[-1.0, 2.0]);
        assert_eq!(s.to_dense(), vec![0.0, -1.0, 0.0, 2.0]);
        assert!(s.is_k_sparse(2) && !s.is_k_sparse(1));
    }

    #[test]
    fn correlations_examples() {
        let i3 = DenseMatrix::identity(3);
        assert_eq!(
            correlations(&i3, &[0.0, -5.0, 0.0]).unwrap(),
            vec![0.0, 5.0, 0.0]
        );
        assert_eq!(correlations(&i3, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            correlations(&i3, &[1.0]),
            Err(RecoveryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn omp_on_identity() {
        let i3 = DenseMatrix::identity(3);
        let trace = omp_run(&i3, &[0.0, 5.0, 0.0], 1, &OmpOptions::default()).unwrap();
        assert_eq!(trace.selected(), vec![1]);
        assert_eq!(trace.final_residual_norm(), 0.0);
        let est = trace.final_estimate();
        assert_eq!(est.support(), &[1]);
        assert_abs_diff_eq!(est.values()[0], 5.0, epsilon = 1e-15);
    }

    #[test]
    fn omp_errors() {
        let i3 = DenseMatrix::identity(3);
        assert!(matches!(
            omp_run(&i3, &[1.0, 2.0, 3.0], 4, &OmpOptions::default()),
            Err(RecoveryError::SparsityTooLarge { .. })
        ));
        assert!(matches!(
            omp_run(&i3, &[1.0], 1, &OmpOptions::default()),
            Err(RecoveryError::DimensionMismatch { .. })
        ));
        assert_eq!(
            omp_run(
                &i3,
                &[1.0, 0.0, 0.0],
                1,
                &OmpOptions::with_policy(TiePolicy::Adversarial)
            ),
            Err(RecoveryError::MissingTrueSupport)
        );
        // two copies of e_1: once the residual is zero every remaining
        // column ties at 0 and the smallest index is the dependent copy
        let dup =
            DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(
            omp_run(&dup, &[1.0, 0.0], 2, &OmpOptions::default()),
            Err(RecoveryError::RankDeficientSupport {
                support: vec![0, 1]
            })
        );
        let trace = omp_run(
            &dup,
            &[1.0, 0.0],
            2,
            &OmpOptions::with_policy(TiePolicy::LargestIndex),
        )
        .unwrap();
        assert_eq!(trace.selected(), vec![1, 2]);
    }

    #[test]
    fn tie_policies_on_equal_columns() {
        let a = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let y = [1.0, 1.0];
        let s = omp_run(
            &a,
            &y,
            1,
            &OmpOptions::with_policy(TiePolicy::SmallestIndex),
        )
        .unwrap();
        let l = omp_run(&a, &y, 1, &OmpOptions::with_policy(TiePolicy::LargestIndex)).unwrap();
        let adv = omp_run(&a, &y, 1, &OmpOptions::adversarial(&[0])).unwrap();
        assert_eq!(s.selected(), vec![0]);
        assert_eq!(l.selected(), vec![1]);
        assert_eq!(adv.selected(), vec![1]);
        assert!(s.iterations[0].tie);
        assert_eq!(s.iterations[0].tied, vec![0, 1]);
    }

    #[test]
    fn early_stop_on_zero_measurement() {
        let i3 = DenseMatrix::identity(3);
        let opts = OmpOptions {
            early_stop: true,
            ..OmpOptions::default()
        };
        let trace = omp_run(&i3, &[0.0; 3], 2, &opts).unwrap();
        assert!(trace.iterations.is_empty());
        assert!(trace.stopped_early);
        assert_eq!(trace.final_residual_norm(), 0.0);

        // without early stop all K iterations run
        let trace = omp_run(&i3, &[0.0; 3], 2, &OmpOptions::default()).unwrap();
        assert_eq!(trace.iterations.len(), 2);
        assert!(trace.final_estimate().is_empty());
    }

    #[test]
    fn recovery_requires_nonzero_sparse_signal() {
        let i3 = DenseMatrix::identity(3);
        let zero = SparseSignal::new(3, vec![], vec![]).unwrap();
        assert!(exact_recovery_check(&i3, &zero, 1, TiePolicy::SmallestIndex).is_err());
        let x = SparseSignal::new(3, vec![0, 1], vec![1.0, 1.0]).unwrap();
        assert!(exact_recovery_check(&i3, &x, 1, TiePolicy::SmallestIndex).is_err());
        for j in 0..3 {
            let x = SparseSignal::new(3, vec![j], vec![-2.5]).unwrap();
            assert!(
                exact_recovery_check(&i3, &x, 1, TiePolicy::SmallestIndex)
                    .unwrap()
                    .recovered
            );
        }
    }

    #[test]
    fn recovery_with_slack_iterations() {
        let i3 = DenseMatrix::identity(3);
        let x = SparseSignal::new(3, vec![2], vec![4.0]).unwrap();
        let out = exact_recovery_check(&i3, &x, 2, TiePolicy::SmallestIndex).unwrap();
        assert!(out.recovered);
        assert_eq!(out.trace.support.len(), 2);
    }

    #[test]
    fn l0_on_identity() {
        let i3 = DenseMatrix::identity(3);
        let sol = l0_oracle(&i3, &[0.0, 5.0, 0.0], 1, DEFAULT_L0_BUDGET).unwrap();
        assert_eq!(sol.support, vec![1]);
        assert_eq!(sol.signal.values(), &[5.0]);
        assert_eq!(sol.supports_examined, 3);
        assert!(matches!(
            l0_oracle(&i3, &[0.0, 5.0, 0.0], 1, 2),
            Err(RecoveryError::BudgetExceeded {
                count: 3,
                budget: 2
            })
        ));
    }

    #[test]
    fn l0_skips_dependent_supports() {
        let a =
            DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let sol = l0_oracle(&a, &[1.0, 1.0], 2, DEFAULT_L0_BUDGET).unwrap();
        assert_eq!(sol.skipped, vec![vec![0, 1]]);
        assert_eq!(sol.support, vec![0, 2]);
        assert!(sol.residual_norm < 1e-15);
    }
}
