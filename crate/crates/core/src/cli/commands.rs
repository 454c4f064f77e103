use serde::{Deserialize, Serialize};

use super::{CliError, ExitStatus, Payload, RunConfig};
use crate::counterexample::{
    self, build_instance, gap_search, t_grid, witness_check, Clause, CounterexampleError,
    GapConfig, GapReport, WitnessReport,
};
use crate::io;
use crate::numerics::least_squares;
use crate::ric::{evaluate_conditions, exact_ric, ConditionReport, RicReport};
use crate::sparse_recovery::{
    exact_recovery_check, omp_run, OmpOptions, OmpTrace, SparseSignal, TiePolicy,
};
use crate::sufficiency::{run_sufficiency_suite, SufficiencyConfig, SufficiencyError};

type CmdResult = Result<(Payload, ExitStatus), CliError>;

fn require<T: Copy>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("{flag} is required")))
}

fn require_path<'a>(
    value: &'a Option<std::path::PathBuf>,
    flag: &str,
) -> Result<&'a std::path::Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{flag} PATH is required")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeFailure {
    pub clause: Clause,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CePoint {
    pub t: f64,
    pub witness: Option<WitnessReport>,
    pub failure: Option<CeFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeResults {
    #[serde(rename = "K")]
    pub k: usize,
    pub policy: TiePolicy,
    pub points: Vec<CePoint>,
    pub all_passed: bool,
}

pub(super) fn cmd_ce(cfg: &RunConfig) -> CmdResult {
    let k = require(cfg.sparsity, "--K")?;
    let ts = match (cfg.t, cfg.t_grid) {
        (Some(t), None) => vec![t],
        (None, Some(points)) if points > 0 => t_grid(k, points),
        (None, Some(_)) => return Err(CliError::Usage("--t-grid needs N >= 1".into())),
        (None, None) => return Err(CliError::Usage("one of --t or --t-grid is required".into())),
        (Some(_), Some(_)) => return Err(CliError::Usage("--t and --t-grid are exclusive".into())),
    };
    let tol = cfg.tolerances();
    let mut points = Vec::with_capacity(ts.len());
    for &t in &ts {
        // invalid (K, t) is a usage error, not a verification failure
        let inst = build_instance(k, t)?;
        if ts.len() == 1 {
            if let Some(path) = &cfg.matrix {
                io::write_matrix(path, &inst.a)?;
            }
            if let Some(path) = &cfg.vector {
                io::write_vector(path, &inst.measurements())?;
            }
        }
        point_for(&inst, cfg.policy, &tol, &mut points)?;
    }
    let all_passed = points.iter().all(|p| p.failure.is_none());
    let status = if all_passed {
        ExitStatus::Success
    } else {
        ExitStatus::VerificationFailed
    };
    Ok((
        Payload::Ce(CeResults {
            k,
            policy: cfg.policy,
            points,
            all_passed,
        }),
        status,
    ))
}

fn point_for(
    inst: &counterexample::CounterexampleInstance,
    policy: TiePolicy,
    tol: &counterexample::Tolerances,
    points: &mut Vec<CePoint>,
) -> Result<(), CliError> {
    match witness_check(inst, policy, tol) {
        Ok(w) => points.push(CePoint {
            t: inst.t,
            witness: Some(w),
            failure: None,
        }),
        Err(CounterexampleError::VerificationFailed { clause, detail }) => points.push(CePoint {
            t: inst.t,
            witness: None,
            failure: Some(CeFailure { clause, detail }),
        }),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicResults {
    pub rows: usize,
    pub cols: usize,
    pub matrix_digest: String,
    pub reports: Vec<RicReport>,
    pub conditions: Option<ConditionReport>,
}

pub(super) fn cmd_ric(cfg: &RunConfig) -> CmdResult {
    let a = io::read_matrix(require_path(&cfg.matrix, "--matrix")?)?;
    let budget = cfg.budget as u128;
    let orders: Vec<usize> = match (cfg.order, cfg.k_max) {
        (Some(k), None) => vec![k],
        (None, Some(kmax)) => (1..=kmax).collect(),
        (None, None) => match cfg.sparsity {
            Some(k) => vec![k + 1],
            None => {
                return Err(CliError::Usage(
                    "one of --k, --k-max or --K is required".into(),
                ))
            }
        },
        (Some(_), Some(_)) => return Err(CliError::Usage("--k and --k-max are exclusive".into())),
    };
    let mut reports = Vec::with_capacity(orders.len());
    for k in orders {
        reports.push(exact_ric(&a, k, budget)?);
    }
    let conditions = match cfg.sparsity {
        Some(k) => {
            let delta = match reports.iter().find(|r| r.order == k + 1) {
                Some(r) => r.delta,
                None => exact_ric(&a, k + 1, budget)?.delta,
            };
            Some(evaluate_conditions(delta, k))
        }
        None => None,
    };
    Ok((
        Payload::Ric(RicResults {
            rows: a.rows(),
            cols: a.cols(),
            matrix_digest: io::matrix_digest(&a),
            reports,
            conditions,
        }),
        ExitStatus::Success,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmpResults {
    pub trace: OmpTrace,
    pub estimate: SparseSignal,
    pub final_residual_norm: f64,
    /// Largest difference between the last-iteration coefficients and a
    /// fresh least-squares solve over the final support.
    pub output_resolve_max_diff: f64,
    pub note: Option<String>,
}

pub(super) fn cmd_omp(cfg: &RunConfig) -> CmdResult {
    let a = io::read_matrix(require_path(&cfg.matrix, "--matrix")?)?;
    let y = io::read_vector(require_path(&cfg.vector, "--vector")?)?;
    let k = require(cfg.sparsity, "--K")?;
    let true_support = match &cfg.truth {
        Some(path) => Some(
            SparseSignal::from_dense(&io::read_vector(path)?)?
                .support()
                .to_vec(),
        ),
        None => None,
    };
    if cfg.policy == TiePolicy::Adversarial && true_support.is_none() {
        return Err(CliError::Usage(
            "--policy adversarial needs --truth PATH".into(),
        ));
    }
    let opts = OmpOptions {
        policy: cfg.policy,
        tie_tol: cfg.tol_tie,
        early_stop: cfg.early_stop,
        true_support,
    };
    let trace = omp_run(&a, &y, k, &opts)?;
    let output_resolve_max_diff = if trace.support.is_empty() {
        0.0
    } else {
        let z = least_squares(&a.select_columns(&trace.support)?, &y)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        z.iter()
            .zip(&trace.coefficients)
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
    };
    let note = trace.stopped_early.then(|| {
        format!(
            "early stop after {} of {k} iterations; residual norm {}",
            trace.iterations.len(),
            trace.final_residual_norm()
        )
    });
    Ok((
        Payload::Omp(Box::new(OmpResults {
            estimate: trace.final_estimate(),
            final_residual_norm: trace.final_residual_norm(),
            output_resolve_max_diff,
            note,
            trace,
        })),
        ExitStatus::Success,
    ))
}

pub(super) fn cmd_conditions(cfg: &RunConfig) -> CmdResult {
    let k = require(cfg.sparsity, "--K")?;
    let delta = match (cfg.delta, &cfg.matrix) {
        (Some(d), None) => {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(CliError::Usage("--delta must be finite and >= 0".into()));
            }
            d
        }
        (None, Some(path)) => exact_ric(&io::read_matrix(path)?, k + 1, cfg.budget as u128)?.delta,
        _ => {
            return Err(CliError::Usage(
                "exactly one of --delta or --matrix is required".into(),
            ))
        }
    };
    Ok((
        Payload::Conditions(evaluate_conditions(delta, k)),
        ExitStatus::Success,
    ))
}

pub(super) fn cmd_thm2(cfg: &RunConfig) -> CmdResult {
    let defaults = SufficiencyConfig::default();
    let suite = SufficiencyConfig {
        k: cfg.sparsity.unwrap_or(defaults.k),
        m: cfg.m.unwrap_or(defaults.m),
        n: cfg.n.unwrap_or(defaults.n),
        matrices: cfg.matrices.unwrap_or(defaults.matrices),
        draws: cfg.draws.unwrap_or(defaults.draws),
        seed: cfg.seed,
        policy: cfg.policy,
        budget: cfg.budget as u128,
    };
    let report = run_sufficiency_suite(&suite).map_err(|e| match e {
        SufficiencyError::Ric(r) => CliError::from(r),
        SufficiencyError::Recovery(r) => CliError::from(r),
        other => CliError::Usage(other.to_string()),
    })?;
    let status = if report.holds() {
        ExitStatus::Success
    } else {
        ExitStatus::VerificationFailed
    };
    Ok((Payload::Thm2(report), status))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResults {
    pub search: GapConfig,
    pub report: GapReport,
    /// Failing findings whose recorded signal fails again on replay.
    pub replays_confirmed: usize,
}

pub(super) fn cmd_gap(cfg: &RunConfig) -> CmdResult {
    let defaults = GapConfig::default();
    let search = GapConfig {
        k: cfg.sparsity.unwrap_or(defaults.k),
        trials: cfg.trials.unwrap_or(defaults.trials),
        seed: cfg.seed,
        m: cfg.m.unwrap_or(defaults.m),
        n: cfg.n.unwrap_or(defaults.n),
        draws: cfg.draws.unwrap_or(defaults.draws),
        budget: cfg.budget as u128,
    };
    let report = gap_search(&search)?;
    let mut replays_confirmed = 0;
    for f in &report.findings {
        if let Some(fail) = &f.failing {
            let replay = exact_recovery_check(&f.matrix, &fail.x, search.k, fail.policy);
            if replay.map_or(true, |o| !o.recovered) {
                replays_confirmed += 1;
            }
        }
    }
    Ok((
        Payload::Gap(GapResults {
            search,
            report,
            replays_confirmed,
        }),
        ExitStatus::Success,
    ))
}

fn num(v: f64) -> String {
    if v != 0.0 && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub(super) fn to_csv(payload: &Payload) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut rec = |fields: Vec<String>| w.write_record(&fields).expect("in-memory csv");
    match payload {
        Payload::Ce(r) => {
            rec([
                "K",
                "t",
                "s",
                "policy",
                "eig_max_abs_diff",
                "delta_computed",
                "ric_abs_diff",
                "corr_max_abs_diff",
                "factor_residual",
                "selected",
                "tie_detected",
                "omp_failed",
                "status",
            ]
            .map(String::from)
            .to_vec());
            for p in &r.points {
                match (&p.witness, &p.failure) {
                    (Some(w), _) => rec(vec![
                        w.k.to_string(),
                        num(w.t),
                        num(w.s),
                        w.policy_used.name().into(),
                        num(w.eig_check.max_abs_diff),
                        num(w.ric_check.delta_computed),
                        num(w.ric_check.abs_diff),
                        num(w.correlation_check.max_abs_diff),
                        num(w.factor_check.max_abs_residual),
                        join(&w.selected),
                        w.tie_detected.to_string(),
                        w.omp_failed.to_string(),
                        "pass".into(),
                    ]),
                    (None, f) => {
                        let mut row = vec![r.k.to_string(), num(p.t)];
                        row.extend(std::iter::repeat_n(String::new(), 10));
                        row.push(opt(f.as_ref().map(|f| format!("fail: {}", f.clause))));
                        rec(row);
                    }
                }
            }
        }
        Payload::Ric(r) => {
            rec([
                "order",
                "delta",
                "witness_subset",
                "lambda_min",
                "lambda_max",
                "subsets_examined",
            ]
            .map(String::from)
            .to_vec());
            for rep in &r.reports {
                rec(vec![
                    rep.order.to_string(),
                    num(rep.delta),
                    join(&rep.witness_subset),
                    num(rep.lambda_min),
                    num(rep.lambda_max),
                    rep.subsets_examined.to_string(),
                ]);
            }
        }
        Payload::Omp(r) => {
            rec([
                "k",
                "selected",
                "tie",
                "tied",
                "support_after",
                "residual_norm",
            ]
            .map(String::from)
            .to_vec());
            for it in &r.trace.iterations {
                rec(vec![
                    it.k.to_string(),
                    it.selected.to_string(),
                    it.tie.to_string(),
                    join(&it.tied),
                    join(&it.support_after),
                    num(it.residual_norm),
                ]);
            }
        }
        Payload::Conditions(c) => {
            rec([
                "K",
                "delta",
                "name",
                "reference",
                "threshold",
                "strict",
                "satisfied",
            ]
            .map(String::from)
            .to_vec());
            for row in &c.rows {
                rec(vec![
                    c.k.to_string(),
                    num(c.delta_measured),
                    row.name.clone(),
                    row.reference.clone(),
                    num(row.threshold),
                    row.strict.to_string(),
                    row.satisfied.to_string(),
                ]);
            }
        }
        Payload::Thm2(t) => {
            rec([
                "index",
                "generator",
                "delta",
                "satisfied",
                "signals",
                "failures",
            ]
            .map(String::from)
            .to_vec());
            for o in &t.outcomes {
                let gen = match o.generator {
                    crate::ensemble::Generator::ColumnNormalized => "column_normalized".into(),
                    crate::ensemble::Generator::NearOrthogonal { eps } => {
                        format!("near_orthogonal(eps={eps})")
                    }
                };
                rec(vec![
                    o.index.to_string(),
                    gen,
                    num(o.delta),
                    o.satisfied.to_string(),
                    o.signals.to_string(),
                    o.failures.to_string(),
                ]);
            }
        }
        Payload::Gap(g) => {
            rec([
                "trial",
                "generator",
                "matrix_digest",
                "delta",
                "signals_tested",
                "failure_found",
                "failing_support",
                "failing_values",
                "failing_policy",
            ]
            .map(String::from)
            .to_vec());
            for f in &g.report.findings {
                let gen = match f.generator {
                    counterexample::GapGenerator::ColumnNormalized => "column_normalized".into(),
                    counterexample::GapGenerator::PerturbedConstruction { lambda, eps } => {
                        format!("perturbed_construction(lambda={lambda};eps={eps})")
                    }
                };
                rec(vec![
                    f.trial.to_string(),
                    gen,
                    f.matrix_digest.clone(),
                    num(f.delta),
                    f.signals_tested.to_string(),
                    f.failure_found.to_string(),
                    opt(f.failing.as_ref().map(|x| join(x.x.support()))),
                    opt(f.failing.as_ref().map(|x| {
                        x.x.values()
                            .iter()
                            .map(|v| num(*v))
                            .collect::<Vec<_>>()
                            .join(";")
                    })),
                    opt(f.failing.as_ref().map(|x| x.policy.name())),
                ]);
            }
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}
