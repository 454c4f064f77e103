//! Empirical check of the sharp sufficient condition: on every matrix with
//! `δ_{K+1} ≤ 1/(√K+1)`, OMP must recover every `K`-sparse signal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{self, mixed_generator, rng_for, Generator};
use crate::ric::{exact_ric, sharp_threshold, RicError, DEFAULT_RIC_BUDGET};
use crate::sparse_recovery::{exact_recovery_check, RecoveryError, TiePolicy};
use crate::subsets::binomial;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub matrices: usize,
    pub draws: usize,
    pub seed: u64,
    pub policy: TiePolicy,
    pub budget: u128,
}

impl Default for SufficiencyConfig {
    fn default() -> Self {
        Self {
            k: 2,
            m: 40,
            n: 12,
            matrices: 50,
            draws: 5,
            seed: 42,
            policy: TiePolicy::SmallestIndex,
            budget: DEFAULT_RIC_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixOutcome {
    pub index: usize,
    pub generator: Generator,
    pub delta: f64,
    pub satisfied: bool,
    pub signals: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub matrices: usize,
    pub signals: usize,
    pub recovered: usize,
    pub failures: usize,
    /// `None` when the partition is empty.
    pub recovery_rate: Option<f64>,
}

impl Partition {
    fn add(&mut self, m: &MatrixOutcome) {
        self.matrices += 1;
        self.signals += m.signals;
        self.failures += m.failures;
        self.recovered += m.signals - m.failures;
        self.recovery_rate =
            (self.signals > 0).then(|| self.recovered as f64 / self.signals as f64);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyReport {
    pub threshold: f64,
    pub outcomes: Vec<MatrixOutcome>,
    pub satisfied: Partition,
    pub unsatisfied: Partition,
}

impl SufficiencyReport {
    /// Every signal on every satisfying matrix was recovered.
    pub fn holds(&self) -> bool {
        self.satisfied.failures == 0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SufficiencyError {
    #[error("need 1 <= K < n (K = {k}, n = {n})")]
    InvalidDimensions { k: usize, n: usize },
    #[error(transparent)]
    Ric(#[from] RicError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

fn run_matrix(cfg: &SufficiencyConfig, index: usize) -> Result<MatrixOutcome, SufficiencyError> {
    let generator = mixed_generator(index, cfg.matrices);
    let mut rng = rng_for(cfg.seed, index as u64);
    let a = ensemble::generate(generator, cfg.m, cfg.n, &mut rng);
    let delta = exact_ric(&a, cfg.k + 1, cfg.budget)?.delta;
    let satisfied = delta <= sharp_threshold(cfg.k);
    let signals = ensemble::support_sweep(cfg.n, cfg.k, cfg.draws, &mut rng);
    let mut failures = 0;
    for x in &signals {
        match exact_recovery_check(&a, x, cfg.k, cfg.policy) {
            Ok(out) if out.recovered => {}
            Ok(_) | Err(RecoveryError::RankDeficientSupport { .. }) => failures += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(MatrixOutcome {
        index,
        generator,
        delta,
        satisfied,
        signals: signals.len(),
        failures,
    })
}

/// Generates the mixed ensemble, measures `δ_{K+1}` exactly, and sweeps all
/// supports times `draws` coefficient vectors on every matrix.
pub fn run_sufficiency_suite(
    cfg: &SufficiencyConfig,
) -> Result<SufficiencyReport, SufficiencyError> {
    if cfg.k == 0 || cfg.k >= cfg.n {
        return Err(SufficiencyError::InvalidDimensions { k: cfg.k, n: cfg.n });
    }
    let count = binomial(cfg.n, cfg.k + 1);
    if count > cfg.budget {
        return Err(RicError::BudgetExceeded {
            count,
            budget: cfg.budget,
        }
        .into());
    }
    let outcomes = (0..cfg.matrices)
        .into_par_iter()
        .map(|i| run_matrix(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut satisfied = Partition::default();
    let mut unsatisfied = Partition::default();
    for o in &outcomes {
        if o.satisfied {
            satisfied.add(o);
        } else {
            unsatisfied.add(o);
        }
    }
    Ok(SufficiencyReport {
        threshold: sharp_threshold(cfg.k),
        outcomes,
        satisfied,
        unsatisfied,
    })
}
