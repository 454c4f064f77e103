//! The OMP failure family and the search for failures below its threshold.
//!
//! For `K ≥ 2` the Gram matrix
//!
//! ```text
//! B = [ K/(K+1) I_K    1/(K+1) 𝟙   ]
//!     [ 1/(K+1) 𝟙ᵀ     (K+2)/(K+1) ]
//! ```
//!
//! has spectrum `{K/(K+1) (×K−1), 1 − 1/√(K+1), 1 + 1/√(K+1)}`. Shifting it
//! to `C = B − sI` with `s = t − 1/√(K+1)` and factoring `C = AᵀA` gives a
//! square `A` with `δ_{K+1}(A) = t`; for `x = (1, …, 1, 0)` the last column
//! correlates with `Ax` at least as strongly as any column in the support,
//! so the first OMP pick can be wrong.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{self, rng_for};
use crate::io::matrix_digest;
use crate::numerics::{spd_upper_factor, sym_eigenvalues, DenseMatrix, NumericsError};
use crate::ric::{self, exact_ric, failure_threshold, sharp_threshold, RicError};
use crate::sparse_recovery::{
    correlations, exact_recovery_check, RecoveryError, SparseSignal, TiePolicy, DEFAULT_TIE_TOL,
};
use crate::subsets::binomial;

/// Number of points in the default `t` grid per `K`.
pub const DEFAULT_GRID_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CounterexampleError {
    #[error("K = {k} is too small; the construction needs K >= 2")]
    KTooSmall { k: usize },
    #[error("t = {t} outside [{lower}, 1) for K = {k}")]
    TOutOfRange { k: usize, t: f64, lower: f64 },
    #[error("verification failed in clause {clause}: {detail}")]
    VerificationFailed { clause: Clause, detail: String },
    #[error("n = {n} must exceed K = {k}")]
    InvalidDimensions { k: usize, n: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Ric(#[from] RicError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

pub type Result<T> = std::result::Result<T, CounterexampleError>;

/// Which claim of the construction a verification failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    Factorization,
    Eigenvalues,
    Ric,
    Correlations,
    OmpFailure,
}

impl std::fmt::Display for Clause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Clause::Factorization => "factorization",
            Clause::Eigenvalues => "eigenvalues",
            Clause::Ric => "restricted isometry constant",
            Clause::Correlations => "first-iteration correlations",
            Clause::OmpFailure => "OMP failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub eig: f64,
    pub ric: f64,
    pub corr: f64,
    pub tie: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eig: 1e-10,
            ric: 1e-8,
            corr: 1e-10,
            tie: DEFAULT_TIE_TOL,
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(CounterexampleError::KTooSmall { k });
    }
    Ok(())
}

fn check_t(k: usize, t: f64) -> Result<()> {
    let lower = failure_threshold(k);
    if !(t >= lower && t < 1.0) {
        return Err(CounterexampleError::TOutOfRange { k, t, lower });
    }
    Ok(())
}

/// The `(K+1) x (K+1)` matrix `B`.
pub fn build_b(k: usize) -> Result<DenseMatrix> {
    check_k(k)?;
    let n = k + 1;
    let kf = k as f64;
    let mut data = vec![0.0; n * n];
    for i in 0..k {
        data[i * n + i] = kf / (kf + 1.0);
        data[i * n + k] = 1.0 / (kf + 1.0);
        data[k * n + i] = 1.0 / (kf + 1.0);
    }
    data[k * n + k] = (kf + 2.0) / (kf + 1.0);
    Ok(DenseMatrix::new(n, n, data)?)
}

/// `s = t − 1/√(K+1)`.
pub fn shift(k: usize, t: f64) -> f64 {
    t - failure_threshold(k)
}

/// Closed-form spectrum of `C = B − sI`, ascending.
pub fn closed_form_eigs(k: usize, t: f64) -> Result<Vec<f64>> {
    check_k(k)?;
    check_t(k, t)?;
    let kf = k as f64;
    let s = shift(k, t);
    let mut eigs = vec![kf / (kf + 1.0) - s; k - 1];
    eigs.push(1.0 - t);
    eigs.push(1.0 + failure_threshold(k) - s);
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

/// `t_j = 1/√(K+1) + j (1 − 1/√(K+1)) / points`, `j = 0..points`.
pub fn t_grid(k: usize, points: usize) -> Vec<f64> {
    let lo = failure_threshold(k);
    (0..points)
        .map(|j| lo + j as f64 * (1.0 - lo) / points as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleInstance {
    #[serde(rename = "K")]
    pub k: usize,
    pub t: f64,
    pub s: f64,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub a: DenseMatrix,
    pub x: SparseSignal,
    pub predicted_eigs: Vec<f64>,
    /// `K/(K+1) − s`, the correlation of every support column.
    pub predicted_on_support: f64,
    /// `K/(K+1)`, the correlation of the last column.
    pub predicted_off_support: f64,
}

impl CounterexampleInstance {
    /// `y = A x`.
    pub fn measurements(&self) -> Vec<f64> {
        self.a
            .mul_vec(&self.x.to_dense())
            .expect("x has K+1 entries")
    }

    pub fn off_support_index(&self) -> usize {
        self.k
    }
}

pub fn build_instance(k: usize, t: f64) -> Result<CounterexampleInstance> {
    check_k(k)?;
    check_t(k, t)?;
    let s = shift(k, t);
    let b = build_b(k)?;
    let c = b.shift_diagonal(s)?;
    let a = spd_upper_factor(&c)?;
    let x = SparseSignal::new(k + 1, (0..k).collect(), vec![1.0; k])
        .expect("all-ones signal on the first K indices");
    let kf = k as f64;
    Ok(CounterexampleInstance {
        k,
        t,
        s,
        b,
        c,
        a,
        x,
        predicted_eigs: closed_form_eigs(k, t)?,
        predicted_on_support: kf / (kf + 1.0) - s,
        predicted_off_support: kf / (kf + 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorCheck {
    pub max_abs_residual: f64,
    pub bound: f64,
    pub upper_triangular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigCheck {
    pub predicted: Vec<f64>,
    pub computed: Vec<f64>,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicCheck {
    pub delta_computed: f64,
    pub t: f64,
    pub abs_diff: f64,
    pub witness: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCheck {
    pub on_support_values: Vec<f64>,
    pub off_support_value: f64,
    pub predicted_on_support: f64,
    pub predicted_off_support: f64,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub t: f64,
    pub s: f64,
    pub policy_used: TiePolicy,
    pub factor_check: FactorCheck,
    pub eig_check: EigCheck,
    pub ric_check: RicCheck,
    pub correlation_check: CorrelationCheck,
    pub selected: Vec<usize>,
    pub tie_detected: bool,
    pub omp_failed: bool,
    pub note: Option<String>,
}

fn verify(clause: Clause, ok: bool, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CounterexampleError::VerificationFailed {
            clause,
            detail: detail(),
        })
    }
}

/// Verifies every quantitative claim of the construction for one instance.
pub fn witness_check(
    inst: &CounterexampleInstance,
    policy: TiePolicy,
    tol: &Tolerances,
) -> Result<WitnessReport> {
    let dim = (inst.k + 1) as f64;

    let rtr = inst.a.transpose().matmul(&inst.a)?;
    let factor_check = FactorCheck {
        max_abs_residual: rtr.max_abs_diff(&inst.c)?,
        bound: 1e-10 * inst.c.max_abs() * dim,
        upper_triangular: inst.a.is_upper_triangular(),
    };
    verify(
        Clause::Factorization,
        factor_check.upper_triangular && factor_check.max_abs_residual <= factor_check.bound,
        || format!("{factor_check:?}"),
    )?;

    let computed = sym_eigenvalues(&inst.c, 1e-12)?;
    let max_abs_diff = computed
        .iter()
        .zip(&inst.predicted_eigs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let eig_check = EigCheck {
        predicted: inst.predicted_eigs.clone(),
        computed,
        max_abs_diff,
    };
    verify(Clause::Eigenvalues, max_abs_diff <= tol.eig, || {
        format!("max |computed - closed form| = {max_abs_diff:e}")
    })?;

    let ric = exact_ric(&inst.a, inst.k + 1, 1)?;
    let ric_check = RicCheck {
        delta_computed: ric.delta,
        t: inst.t,
        abs_diff: (ric.delta - inst.t).abs(),
        witness: ric.witness_subset,
    };
    verify(Clause::Ric, ric_check.abs_diff <= tol.ric, || {
        format!("delta = {} vs t = {}", ric_check.delta_computed, inst.t)
    })?;

    let y = inst.measurements();
    let corr = correlations(&inst.a, &y)?;
    let on: Vec<f64> = corr[..inst.k].to_vec();
    let off = corr[inst.k];
    let corr_diff = on
        .iter()
        .map(|v| (v - inst.predicted_on_support).abs())
        .fold((off - inst.predicted_off_support).abs(), f64::max);
    let correlation_check = CorrelationCheck {
        on_support_values: on,
        off_support_value: off,
        predicted_on_support: inst.predicted_on_support,
        predicted_off_support: inst.predicted_off_support,
        max_abs_diff: corr_diff,
    };
    verify(Clause::Correlations, corr_diff <= tol.corr, || {
        format!("max |correlation - prediction| = {corr_diff:e}")
    })?;

    let outcome = exact_recovery_check(&inst.a, &inst.x, inst.k, policy)?;
    let tie_detected = outcome.trace.iterations.first().is_some_and(|it| it.tie);
    let omp_failed = !outcome.recovered;
    let mut note = None;
    if inst.s > tol.tie {
        verify(Clause::OmpFailure, omp_failed, || {
            format!(
                "s = {} but OMP under {} recovered={} tie={tie_detected}",
                inst.s,
                policy.name(),
                outcome.recovered
            )
        })?;
    } else {
        verify(Clause::OmpFailure, tie_detected, || {
            "s = 0 must produce a first-iteration tie".into()
        })?;
        if policy == TiePolicy::Adversarial {
            verify(Clause::OmpFailure, omp_failed, || {
                "adversarial tie-breaking did not make OMP fail".into()
            })?;
        }
        note = Some(if omp_failed {
            format!(
                "boundary t = 1/sqrt(K+1): all first-iteration correlations tie; failure occurs under {} tie-breaking",
                policy.name()
            )
        } else {
            format!(
                "boundary t = 1/sqrt(K+1): all first-iteration correlations tie; {} tie-breaking picks a support index and OMP recovers x, so failure at the boundary requires adversarial tie-breaking",
                policy.name()
            )
        });
    }

    Ok(WitnessReport {
        k: inst.k,
        t: inst.t,
        s: inst.s,
        policy_used: policy,
        factor_check,
        eig_check,
        ric_check,
        correlation_check,
        selected: outcome.trace.selected(),
        tie_detected,
        omp_failed,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    /// Coefficient draws per support in the recovery sweep.
    pub draws: usize,
    pub budget: u128,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            k: 2,
            trials: 200,
            seed: 42,
            m: 8,
            n: 10,
            draws: 5,
            budget: ric::DEFAULT_RIC_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GapGenerator {
    /// Random column-normalized `m x n` matrix.
    ColumnNormalized,
    /// Factor of `(1−λ)B + λI + εE`, `E` random symmetric.
    PerturbedConstruction { lambda: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailingSignal {
    pub x: SparseSignal,
    pub policy: TiePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFinding {
    pub trial: usize,
    pub generator: GapGenerator,
    pub matrix_digest: String,
    pub matrix: DenseMatrix,
    pub delta: f64,
    pub signals_tested: usize,
    pub failure_found: bool,
    pub failing: Option<FailingSignal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub lower: f64,
    pub upper: f64,
    pub candidates: usize,
    pub skipped_not_positive_definite: usize,
    pub findings: Vec<GapFinding>,
}

enum Candidate {
    Matrix(GapGenerator, DenseMatrix),
    Skipped,
}

fn candidate(cfg: &GapConfig, trial: usize) -> Result<Candidate> {
    let mut rng = rng_for(cfg.seed, trial as u64);
    if trial.is_multiple_of(2) {
        let a = ensemble::column_normalized(cfg.m, cfg.n, &mut rng);
        return Ok(Candidate::Matrix(GapGenerator::ColumnNormalized, a));
    }
    use rand::Rng;
    let lambda: f64 = rng.random_range(0.0..0.4);
    let eps: f64 = rng.random_range(0.0..0.05);
    let b = build_b(cfg.k)?;
    let n = cfg.k + 1;
    let mut g = DenseMatrix::identity(n);
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push((1.0 - lambda) * b.get(i, j) + lambda * g.get(i, j));
        }
    }
    for i in 0..n {
        for j in i..n {
            let e: f64 = eps * rng.random_range(-1.0..1.0);
            data[i * n + j] += e;
            if i != j {
                data[j * n + i] += e;
            }
        }
    }
    g = DenseMatrix::new(n, n, data)?;
    match spd_upper_factor(&g) {
        Ok(a) => Ok(Candidate::Matrix(
            GapGenerator::PerturbedConstruction { lambda, eps },
            a,
        )),
        Err(NumericsError::NotPositiveDefinite { .. }) => Ok(Candidate::Skipped),
        Err(e) => Err(e.into()),
    }
}

fn sweep(cfg: &GapConfig, trial: usize, a: &DenseMatrix) -> Result<(usize, Option<FailingSignal>)> {
    let mut rng = rng_for(cfg.seed ^ 0x5eed_5eed, trial as u64);
    let n = a.cols();
    let mut signals = Vec::new();
    for support in crate::subsets::Combinations::new(n, cfg.k) {
        signals.push(SparseSignal::new(n, support.clone(), vec![1.0; cfg.k])?);
        for _ in 1..cfg.draws {
            signals.push(ensemble::signal_on(n, &support, &mut rng));
        }
    }
    let mut tested = 0;
    for x in signals {
        for policy in [TiePolicy::SmallestIndex, TiePolicy::LargestIndex] {
            tested += 1;
            match exact_recovery_check(a, &x, cfg.k, policy) {
                Ok(out) if !out.recovered => {
                    return Ok((tested, Some(FailingSignal { x, policy })));
                }
                Ok(_) => {}
                // dependent selections count as a failure to recover
                Err(RecoveryError::RankDeficientSupport { .. }) => {
                    return Ok((tested, Some(FailingSignal { x, policy })));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok((tested, None))
}

/// Looks for matrices with `δ_{K+1}` strictly between the sharp recovery
/// bound and the failure threshold, then sweeps `K`-sparse signals on them.
pub fn gap_search(cfg: &GapConfig) -> Result<GapReport> {
    check_k(cfg.k)?;
    if cfg.n <= cfg.k {
        return Err(CounterexampleError::InvalidDimensions { k: cfg.k, n: cfg.n });
    }
    let count = binomial(cfg.n, cfg.k + 1);
    if count > cfg.budget {
        return Err(RicError::BudgetExceeded {
            count,
            budget: cfg.budget,
        }
        .into());
    }
    let lower = sharp_threshold(cfg.k);
    let upper = failure_threshold(cfg.k);

    let outcomes: Vec<Result<Option<Option<GapFinding>>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let (generator, a) = match candidate(cfg, trial)? {
                Candidate::Matrix(g, a) => (g, a),
                Candidate::Skipped => return Ok(None),
            };
            let delta = exact_ric(&a, cfg.k + 1, cfg.budget)?.delta;
            if !(delta > lower && delta < upper) {
                return Ok(Some(None));
            }
            let (signals_tested, failing) = sweep(cfg, trial, &a)?;
            Ok(Some(Some(GapFinding {
                trial,
                generator,
                matrix_digest: matrix_digest(&a),
                matrix: a,
                delta,
                signals_tested,
                failure_found: failing.is_some(),
                failing,
            })))
        })
        .collect();

    let mut findings = Vec::new();
    let mut skipped = 0;
    for o in outcomes {
        match o? {
            None => skipped += 1,
            Some(Some(f)) => findings.push(f),
            Some(None) => {}
        }
    }
    Ok(GapReport {
        lower,
        upper,
        candidates: cfg.trials,
        skipped_not_positive_definite: skipped,
        findings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn b_for_k2_and_k3() {
        let b = build_b(2).unwrap();
        let expected = [
            [2.0 / 3.0, 0.0, 1.0 / 3.0],
            [0.0, 2.0 / 3.0, 1.0 / 3.0],
            [1.0 / 3.0, 1.0 / 3.0, 4.0 / 3.0],
        ];
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(b.get(i, j), *v);
            }
        }
        let b3 = build_b(3).unwrap();
        for i in 0..4 {
            let d = if i < 3 { 0.75 } else { 1.25 };
            assert_eq!(b3.get(i, i), d);
            if i < 3 {
                assert_eq!(b3.get(i, 3), 0.25);
                assert_eq!(b3.get(3, i), 0.25);
            }
        }
        assert_eq!(build_b(1), Err(CounterexampleError::KTooSmall { k: 1 }));
    }

    #[test]
    fn first_rows_of_b_sum_to_one() {
        for k in 2..12 {
            let b = build_b(k).unwrap();
            for i in 0..k {
                let sum: f64 = (0..=k).map(|j| b.get(i, j)).sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn closed_forms() {
        let r = 1.0 / 3f64.sqrt();
        let e = closed_form_eigs(2, r).unwrap();
        assert_abs_diff_eq!(e[0], 1.0 - r, epsilon = 1e-15);
        assert_abs_diff_eq!(e[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[2], 1.0 + r, epsilon = 1e-15);

        let e = closed_form_eigs(2, 0.8).unwrap();
        let s = 0.8 - r;
        assert_abs_diff_eq!(s, 0.222_649_7, epsilon = 1e-7);
        assert_abs_diff_eq!(e[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(e[1], 0.444_017_0, epsilon = 1e-7);
        assert_abs_diff_eq!(e[2], 1.354_700_5, epsilon = 1e-7);

        assert!(matches!(
            closed_form_eigs(2, 0.2),
            Err(CounterexampleError::TOutOfRange { .. })
        ));
        assert!(closed_form_eigs(2, 1.0).is_err());
    }

    #[test]
    fn grid_starts_at_boundary_and_excludes_one() {
        let g = t_grid(3, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.5);
        assert!(g[9] < 1.0);
    }

    #[test]
    fn instance_for_k2_t08() {
        let inst = build_instance(2, 0.8).unwrap();
        let diag: Vec<f64> = (0..3).map(|i| inst.c.get(i, i)).collect();
        assert_abs_diff_eq!(diag[0], 0.444_017_0, epsilon = 1e-7);
        assert_abs_diff_eq!(diag[1], 0.444_017_0, epsilon = 1e-7);
        assert_abs_diff_eq!(diag[2], 1.110_683_6, epsilon = 1e-7);
        assert!(inst.a.is_upper_triangular());
    }

    #[test]
    fn instance_at_boundary_has_c_equal_b() {
        let inst = build_instance(2, 1.0 / 3f64.sqrt()).unwrap();
        assert_eq!(inst.s, 0.0);
        assert_eq!(inst.c, inst.b);
    }

    #[test]
    fn instance_near_one() {
        let inst = build_instance(5, 0.99).unwrap();
        let eig = sym_eigenvalues(&inst.c, 1e-12).unwrap();
        assert_abs_diff_eq!(eig[0], 0.01, epsilon = 1e-12);
        assert!(build_instance(5, 0.3).is_err());
    }

    #[test]
    fn witness_strict_case() {
        let rep = witness_check(
            &build_instance(2, 0.8).unwrap(),
            TiePolicy::SmallestIndex,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(rep.omp_failed && !rep.tie_detected);
        assert_eq!(rep.selected[0], 2);
        assert!(rep.note.is_none());
    }

    #[test]
    fn witness_boundary_both_readings() {
        let inst = build_instance(2, 1.0 / 3f64.sqrt()).unwrap();
        let tol = Tolerances::default();
        let adv = witness_check(&inst, TiePolicy::Adversarial, &tol).unwrap();
        assert!(adv.tie_detected && adv.omp_failed);
        assert_eq!(adv.selected[0], 2);
        let small = witness_check(&inst, TiePolicy::SmallestIndex, &tol).unwrap();
        assert!(small.tie_detected && !small.omp_failed);
        assert!(small.note.unwrap().contains("adversarial"));
    }

    #[test]
    fn gap_zero_trials() {
        let cfg = GapConfig {
            trials: 0,
            ..GapConfig::default()
        };
        assert!(gap_search(&cfg).unwrap().findings.is_empty());
    }

    #[test]
    fn gap_rejects_bad_config() {
        let cfg = GapConfig {
            n: 2,
            ..GapConfig::default()
        };
        assert!(matches!(
            gap_search(&cfg),
            Err(CounterexampleError::InvalidDimensions { .. })
        ));
        let cfg = GapConfig {
            budget: 10,
            ..GapConfig::default()
        };
        assert!(matches!(
            gap_search(&cfg),
            Err(CounterexampleError::Ric(RicError::BudgetExceeded { .. }))
        ));
    }
}
