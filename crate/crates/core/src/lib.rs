//! Sparse-recovery analysis toolkit: Orthogonal Matching Pursuit with
//! tracing, exact restricted isometry constants by subset enumeration, and
//! the matrix family on which OMP fails for `δ_{K+1} ≥ 1/√(K+1)`.

pub mod cli;
pub mod counterexample;
pub mod ensemble;
pub mod io;
pub mod numerics;
pub mod ric;
pub mod sparse_recovery;
pub mod subsets;
pub mod sufficiency;

pub use counterexample::{
    build_b, build_instance, closed_form_eigs, gap_search, witness_check, CounterexampleError,
    CounterexampleInstance, GapConfig, GapReport, Tolerances, WitnessReport,
};
pub use numerics::{
    gram_submatrix, least_squares, spd_upper_factor, sym_eigenvalues, DenseMatrix, NumericsError,
};
pub use ric::{
    evaluate_conditions, exact_ric, lemma1_forward_check, lemma2_check, ConditionReport, RicError,
    RicReport,
};
pub use sparse_recovery::{
    correlations, exact_recovery_check, l0_oracle, omp_run, OmpOptions, OmpTrace, RecoveryError,
    SparseSignal, TiePolicy,
};
