//! Command-line surface: configuration, report envelope and output writing.
//!
//! Every command returns a [`Report`]; the binary serializes it as JSON (or
//! CSV for the tabular part) and maps the [`ExitStatus`] to the process exit
//! code.

mod commands;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counterexample::{CounterexampleError, Tolerances};
use crate::io::IoError;
use crate::ric::{ConditionReport, RicError, DEFAULT_RIC_BUDGET};
use crate::sparse_recovery::{RecoveryError, TiePolicy};

pub use commands::{CeFailure, CePoint, CeResults, GapResults, OmpResults, RicResults};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Parser)]
#[command(
    name = "omprip",
    version,
    about = "OMP recovery, exact restricted isometry constants and OMP failure constructions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Ce,
    Ric,
    Omp,
    Conditions,
    Thm2,
    Gap,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and verify the OMP failure construction for (K, t) or a t grid.
    Ce(RunConfig),
    /// Exact restricted isometry constants of a matrix file.
    Ric(RunConfig),
    /// Run OMP on a matrix file and a measurement vector file.
    Omp(RunConfig),
    /// Compare a restricted isometry constant against known OMP thresholds.
    Conditions(RunConfig),
    /// Recovery sweep over a seeded matrix ensemble, split by δ_{K+1}.
    Thm2(RunConfig),
    /// Search for matrices with δ_{K+1} between the sharp bound and the failure threshold.
    Gap(RunConfig),
}

impl Command {
    pub fn split(self) -> (CommandName, RunConfig) {
        match self {
            Command::Ce(c) => (CommandName::Ce, c),
            Command::Ric(c) => (CommandName::Ric, c),
            Command::Omp(c) => (CommandName::Omp, c),
            Command::Conditions(c) => (CommandName::Conditions, c),
            Command::Thm2(c) => (CommandName::Thm2, c),
            Command::Gap(c) => (CommandName::Gap, c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn parse_policy(s: &str) -> Result<TiePolicy, String> {
    s.parse()
}

/// Flags shared by every command; each command reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RunConfig {
    /// Sparsity level K.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub sparsity: Option<usize>,
    /// Restricted isometry constant of the construction, in [1/sqrt(K+1), 1).
    #[arg(long)]
    pub t: Option<f64>,
    /// Use an N-point grid of t values starting at 1/sqrt(K+1).
    #[arg(long = "t-grid", value_name = "N")]
    pub t_grid: Option<usize>,
    /// RIC order k.
    #[arg(long = "k")]
    pub order: Option<usize>,
    /// Compute RIC orders 1..=k-max.
    #[arg(long = "k-max")]
    pub k_max: Option<usize>,
    /// Restricted isometry constant to evaluate (conditions).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Tie-breaking policy: smallest, largest or adversarial.
    #[arg(long, default_value = "smallest", value_parser = parse_policy)]
    pub policy: TiePolicy,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Maximum number of subsets an exhaustive enumeration may visit.
    #[arg(long, default_value_t = DEFAULT_RIC_BUDGET as u64)]
    pub budget: u64,
    /// Input matrix (ric, omp, conditions) or export path for A (ce).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Input measurements (omp) or export path for y = Ax (ce).
    #[arg(long)]
    pub vector: Option<PathBuf>,
    /// True signal for adversarial tie-breaking (omp).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long = "tol-eig", default_value_t = 1e-10)]
    pub tol_eig: f64,
    #[arg(long = "tol-ric", default_value_t = 1e-8)]
    pub tol_ric: f64,
    #[arg(long = "tol-tie", default_value_t = 1e-9)]
    pub tol_tie: f64,
    #[arg(long = "tol-corr", default_value_t = 1e-10)]
    pub tol_corr: f64,
    /// Stop OMP once the residual falls to 1e-12 of ‖y‖.
    #[arg(long = "early-stop")]
    pub early_stop: bool,
    /// Rows of generated matrices (thm2 default 40, gap default 8).
    #[arg(long)]
    pub m: Option<usize>,
    /// Columns of generated matrices (thm2 default 12, gap default 10).
    #[arg(long)]
    pub n: Option<usize>,
    /// Ensemble size for thm2 (default 50).
    #[arg(long)]
    pub matrices: Option<usize>,
    /// Coefficient draws per support (default 5).
    #[arg(long)]
    pub draws: Option<usize>,
    /// Candidate matrices for gap (default 200).
    #[arg(long)]
    pub trials: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sparsity: None,
            t: None,
            t_grid: None,
            order: None,
            k_max: None,
            delta: None,
            policy: TiePolicy::SmallestIndex,
            seed: 42,
            budget: DEFAULT_RIC_BUDGET as u64,
            matrix: None,
            vector: None,
            truth: None,
            out: None,
            format: Format::Json,
            tol_eig: 1e-10,
            tol_ric: 1e-8,
            tol_tie: 1e-9,
            tol_corr: 1e-10,
            early_stop: false,
            m: None,
            n: None,
            matrices: None,
            draws: None,
            trials: None,
        }
    }
}

impl RunConfig {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            eig: self.tol_eig,
            ric: self.tol_ric,
            corr: self.tol_corr,
            tie: self.tol_tie,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitStatus {
    Success,
    VerificationFailed,
    Usage,
    BudgetExceeded,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::VerificationFailed => 1,
            ExitStatus::Usage => 2,
            ExitStatus::BudgetExceeded => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(#[from] IoError),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => ExitStatus::Usage,
            CliError::Budget(_) => ExitStatus::BudgetExceeded,
            CliError::Verification(_) => ExitStatus::VerificationFailed,
        }
    }
}

impl From<RicError> for CliError {
    fn from(e: RicError) -> Self {
        match e {
            RicError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<crate::numerics::NumericsError> for CliError {
    fn from(e: crate::numerics::NumericsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<RecoveryError> for CliError {
    fn from(e: RecoveryError) -> Self {
        match e {
            RecoveryError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<CounterexampleError> for CliError {
    fn from(e: CounterexampleError) -> Self {
        match e {
            CounterexampleError::Ric(r) => r.into(),
            CounterexampleError::Recovery(r) => r.into(),
            CounterexampleError::VerificationFailed { .. } => CliError::Verification(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Ce(CeResults),
    Ric(RicResults),
    Omp(Box<OmpResults>),
    Conditions(ConditionReport),
    Thm2(crate::sufficiency::SufficiencyReport),
    Gap(GapResults),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub command: CommandName,
    pub config: RunConfig,
    pub results: Payload,
    pub timing_seconds: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// The JSON report with the timing field removed.
    pub fn payload_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing_seconds");
        }
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn to_csv(&self) -> String {
        commands::to_csv(&self.results)
    }

    pub fn render(&self) -> String {
        match self.config.format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub status: ExitStatus,
}

/// Runs one command to completion without writing anything.
pub fn run(command: CommandName, config: RunConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (results, status) = match command {
        CommandName::Ce => commands::cmd_ce(&config)?,
        CommandName::Ric => commands::cmd_ric(&config)?,
        CommandName::Omp => commands::cmd_omp(&config)?,
        CommandName::Conditions => commands::cmd_conditions(&config)?,
        CommandName::Thm2 => commands::cmd_thm2(&config)?,
        CommandName::Gap => commands::cmd_gap(&config)?,
    };
    Ok(Outcome {
        report: Report {
            schema_version: SCHEMA_VERSION.to_string(),
            command,
            config,
            results,
            timing_seconds: start.elapsed().as_secs_f64(),
        },
        status,
    })
}

/// Runs a command, writes its report, and returns the process exit code.
pub fn execute(command: CommandName, config: RunConfig) -> i32 {
    let out = config.out.clone();
    match run(command, config) {
        Ok(outcome) => {
            let text = outcome.report.render();
            match out {
                Some(path) => {
                    if let Err(e) = crate::io::write_atomic(&path, text.as_bytes()) {
                        eprintln!("error: {e}");
                        return ExitStatus::Usage.code();
                    }
                }
                None => print!("{text}"),
            }
            if outcome.status != ExitStatus::Success {
                eprintln!("verification failed; see report");
            }
            outcome.status.code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.status().code()
        }
    }
}
