//! Python bindings for the `omprip` toolkit.
//!
//! Matrices cross the boundary as `Matrix` objects (or nested lists),
//! signals as `SparseSignal`. Structured reports are returned as plain
//! dictionaries built from their JSON form.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

use omprip::counterexample::{self, DEFAULT_GRID_POINTS};
use omprip::ric::{self, DEFAULT_CHECK_TOL, DEFAULT_RIC_BUDGET};
use omprip::sparse_recovery::{self, DEFAULT_L0_BUDGET, DEFAULT_TIE_TOL};
use omprip::sufficiency::{self, SufficiencyConfig, SufficiencyError};
use omprip::{
    CounterexampleError, DenseMatrix, GapConfig, NumericsError, RecoveryError, RicError, TiePolicy,
    Tolerances,
};

create_exception!(omprip, BudgetExceededError, PyRuntimeError);
create_exception!(omprip, VerificationError, PyRuntimeError);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn ric_err(e: RicError) -> PyErr {
    match e {
        RicError::BudgetExceeded { .. } => BudgetExceededError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn recovery_err(e: RecoveryError) -> PyErr {
    match e {
        RecoveryError::BudgetExceeded { .. } => BudgetExceededError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn counterexample_err(e: CounterexampleError) -> PyErr {
    match e {
        CounterexampleError::VerificationFailed { .. } => VerificationError::new_err(e.to_string()),
        CounterexampleError::Ric(r) => ric_err(r),
        CounterexampleError::Recovery(r) => recovery_err(r),
        other => value_err(other),
    }
}

fn numerics_err(e: NumericsError) -> PyErr {
    value_err(e)
}

/// Serializes through JSON and hands back the equivalent Python object.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_policy(policy: &str) -> PyResult<TiePolicy> {
    policy.parse::<TiePolicy>().map_err(PyValueError::new_err)
}

/// Dense row-major real matrix.
#[pyclass(name = "Matrix", module = "omprip", from_py_object)]
#[derive(Clone)]
pub struct PyMatrix {
    inner: DenseMatrix,
}

#[pymethods]
impl PyMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        DenseMatrix::from_rows(&rows)
            .map(|inner| Self { inner })
            .map_err(numerics_err)
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        Self {
            inner: DenseMatrix::identity(n),
        }
    }

    #[staticmethod]
    fn from_columns(columns: Vec<Vec<f64>>) -> PyResult<Self> {
        DenseMatrix::from_columns(&columns)
            .map(|inner| Self { inner })
            .map_err(numerics_err)
    }

    /// Parses the plain-text `m n` matrix format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        omprip::io::parse_matrix(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Seeded matrix with unit-norm Gaussian columns.
    #[staticmethod]
    #[pyo3(signature = (rows, cols, seed, stream = 0))]
    fn column_normalized(rows: usize, cols: usize, seed: u64, stream: u64) -> Self {
        let mut rng = omprip::ensemble::rng_for(seed, stream);
        Self {
            inner: omprip::ensemble::column_normalized(rows, cols, &mut rng),
        }
    }

    fn to_text(&self) -> String {
        omprip::io::format_matrix(&self.inner)
    }

    fn digest(&self) -> String {
        omprip::io::matrix_digest(&self.inner)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.rows(), self.inner.cols())
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.cols() {
            return Err(value_err(format!("column {j} out of range")));
        }
        Ok(self.inner.column(j))
    }

    fn __getitem__(&self, idx: (usize, usize)) -> PyResult<f64> {
        let (i, j) = idx;
        if i >= self.inner.rows() || j >= self.inner.cols() {
            return Err(pyo3::exceptions::PyIndexError::new_err(
                "index out of range",
            ));
        }
        Ok(self.inner.get(i, j))
    }

    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.mul_vec(&x).map_err(numerics_err)
    }

    fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    fn matmul(&self, other: &PyMatrix) -> PyResult<Self> {
        self.inner
            .matmul(&other.inner)
            .map(|inner| Self { inner })
            .map_err(numerics_err)
    }

    fn __eq__(&self, other: &PyMatrix) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Matrix({}x{})", self.inner.rows(), self.inner.cols())
    }
}

/// Accepts a `Matrix` or a list of rows.
fn matrix_arg(obj: &Bound<'_, PyAny>) -> PyResult<DenseMatrix> {
    if let Ok(m) = obj.cast::<PyMatrix>() {
        return Ok(m.borrow().inner.clone());
    }
    let rows: Vec<Vec<f64>> = obj.extract()?;
    DenseMatrix::from_rows(&rows).map_err(numerics_err)
}

/// Vector with a sorted support and nonzero values on it.
#[pyclass(name = "SparseSignal", module = "omprip", from_py_object)]
#[derive(Clone)]
pub struct PySparseSignal {
    inner: omprip::SparseSignal,
}

#[pymethods]
impl PySparseSignal {
    #[new]
    fn new(length: usize, support: Vec<usize>, values: Vec<f64>) -> PyResult<Self> {
        omprip::SparseSignal::new(length, support, values)
            .map(|inner| Self { inner })
            .map_err(recovery_err)
    }

    #[staticmethod]
    fn from_dense(x: Vec<f64>) -> PyResult<Self> {
        omprip::SparseSignal::from_dense(&x)
            .map(|inner| Self { inner })
            .map_err(recovery_err)
    }

    #[getter]
    fn support(&self) -> Vec<usize> {
        self.inner.support().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_dense(&self) -> Vec<f64> {
        self.inner.to_dense()
    }

    fn norm(&self) -> f64 {
        self.inner.norm2()
    }

    fn __repr__(&self) -> String {
        format!(
            "SparseSignal(len={}, support={:?}, values={:?})",
            self.inner.len(),
            self.inner.support(),
            self.inner.values()
        )
    }
}

/// Per-iteration record of an OMP run.
#[pyclass(name = "OmpTrace", module = "omprip", skip_from_py_object)]
pub struct PyOmpTrace {
    inner: omprip::OmpTrace,
}

#[pymethods]
impl PyOmpTrace {
    /// Selected indices in selection order.
    #[getter]
    fn selected(&self) -> Vec<usize> {
        self.inner.selected()
    }

    #[getter]
    fn support(&self) -> Vec<usize> {
        self.inner.support.clone()
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    #[getter]
    fn stopped_early(&self) -> bool {
        self.inner.stopped_early
    }

    #[getter]
    fn residual_norm(&self) -> f64 {
        self.inner.final_residual_norm()
    }

    #[getter]
    fn policy(&self) -> &'static str {
        self.inner.policy.name()
    }

    fn any_tie(&self) -> bool {
        self.inner.any_tie()
    }

    fn estimate(&self) -> Vec<f64> {
        self.inner.estimate_dense()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("OmpTrace(selected={:?})", self.inner.selected())
    }
}

/// Exact restricted isometry constant of one order.
#[pyclass(name = "RicReport", module = "omprip", skip_from_py_object)]
pub struct PyRicReport {
    inner: omprip::RicReport,
}

#[pymethods]
impl PyRicReport {
    #[getter]
    fn order(&self) -> usize {
        self.inner.order
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn witness_subset(&self) -> Vec<usize> {
        self.inner.witness_subset.clone()
    }

    #[getter]
    fn lambda_min(&self) -> f64 {
        self.inner.lambda_min
    }

    #[getter]
    fn lambda_max(&self) -> f64 {
        self.inner.lambda_max
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "RicReport(order={}, delta={}, witness={:?})",
            self.inner.order, self.inner.delta, self.inner.witness_subset
        )
    }
}

/// A member `(A, x, t)` of the OMP failure family.
#[pyclass(
    name = "CounterexampleInstance",
    module = "omprip",
    skip_from_py_object
)]
pub struct PyInstance {
    inner: omprip::CounterexampleInstance,
}

#[pymethods]
impl PyInstance {
    #[getter]
    #[allow(non_snake_case)]
    fn K(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn s(&self) -> f64 {
        self.inner.s
    }

    #[getter]
    fn a(&self) -> PyMatrix {
        PyMatrix {
            inner: self.inner.a.clone(),
        }
    }

    #[getter]
    fn b(&self) -> PyMatrix {
        PyMatrix {
            inner: self.inner.b.clone(),
        }
    }

    #[getter]
    fn c(&self) -> PyMatrix {
        PyMatrix {
            inner: self.inner.c.clone(),
        }
    }

    #[getter]
    fn x(&self) -> PySparseSignal {
        PySparseSignal {
            inner: self.inner.x.clone(),
        }
    }

    #[getter]
    fn predicted_eigs(&self) -> Vec<f64> {
        self.inner.predicted_eigs.clone()
    }

    fn measurements(&self) -> Vec<f64> {
        self.inner.measurements()
    }

    fn __repr__(&self) -> String {
        format!(
            "CounterexampleInstance(K={}, t={})",
            self.inner.k, self.inner.t
        )
    }
}

#[pyfunction]
#[pyo3(signature = (a, y, k, policy = "smallest", true_support = None, tie_tol = DEFAULT_TIE_TOL, early_stop = false))]
fn omp_run(
    a: &Bound<'_, PyAny>,
    y: Vec<f64>,
    k: usize,
    policy: &str,
    true_support: Option<Vec<usize>>,
    tie_tol: f64,
    early_stop: bool,
) -> PyResult<PyOmpTrace> {
    let a = matrix_arg(a)?;
    let opts = omprip::OmpOptions {
        policy: parse_policy(policy)?,
        tie_tol,
        early_stop,
        true_support,
    };
    sparse_recovery::omp_run(&a, &y, k, &opts)
        .map(|inner| PyOmpTrace { inner })
        .map_err(recovery_err)
}

/// Returns `(recovered, max_value_error, trace)`.
#[pyfunction]
#[pyo3(signature = (a, x, k, policy = "smallest"))]
fn exact_recovery_check(
    a: &Bound<'_, PyAny>,
    x: &PySparseSignal,
    k: usize,
    policy: &str,
) -> PyResult<(bool, f64, PyOmpTrace)> {
    let a = matrix_arg(a)?;
    let out = sparse_recovery::exact_recovery_check(&a, &x.inner, k, parse_policy(policy)?)
        .map_err(recovery_err)?;
    Ok((
        out.recovered,
        out.max_value_error,
        PyOmpTrace { inner: out.trace },
    ))
}

#[pyfunction]
#[pyo3(signature = (a, r))]
fn correlations(a: &Bound<'_, PyAny>, r: Vec<f64>) -> PyResult<Vec<f64>> {
    sparse_recovery::correlations(&matrix_arg(a)?, &r).map_err(recovery_err)
}

#[pyfunction]
#[pyo3(signature = (a, y, k, budget = DEFAULT_L0_BUDGET))]
fn l0_oracle<'py>(
    py: Python<'py>,
    a: &Bound<'py, PyAny>,
    y: Vec<f64>,
    k: usize,
    budget: u128,
) -> PyResult<Bound<'py, PyAny>> {
    let sol = sparse_recovery::l0_oracle(&matrix_arg(a)?, &y, k, budget).map_err(recovery_err)?;
    to_py(py, &sol)
}

#[pyfunction]
#[pyo3(signature = (a, k, budget = DEFAULT_RIC_BUDGET))]
fn exact_ric(a: &Bound<'_, PyAny>, k: usize, budget: u128) -> PyResult<PyRicReport> {
    ric::exact_ric(&matrix_arg(a)?, k, budget)
        .map(|inner| PyRicReport { inner })
        .map_err(ric_err)
}

#[pyfunction]
#[pyo3(signature = (a, k_max, budget = DEFAULT_RIC_BUDGET))]
fn ric_profile(a: &Bound<'_, PyAny>, k_max: usize, budget: u128) -> PyResult<Vec<PyRicReport>> {
    let reports = ric::ric_profile(&matrix_arg(a)?, k_max, budget).map_err(ric_err)?;
    Ok(reports
        .into_iter()
        .map(|inner| PyRicReport { inner })
        .collect())
}

#[pyfunction]
#[allow(non_snake_case)]
fn evaluate_conditions<'py>(py: Python<'py>, delta: f64, K: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &ric::evaluate_conditions(delta, K))
}

#[pyfunction]
#[allow(non_snake_case)]
fn sharp_threshold(K: usize) -> f64 {
    ric::sharp_threshold(K)
}

#[pyfunction]
#[allow(non_snake_case)]
fn failure_threshold(K: usize) -> f64 {
    ric::failure_threshold(K)
}

#[pyfunction]
#[pyo3(signature = (a, x, xp, delta, tol = DEFAULT_CHECK_TOL))]
fn lemma1_forward_check<'py>(
    py: Python<'py>,
    a: &Bound<'py, PyAny>,
    x: &PySparseSignal,
    xp: &PySparseSignal,
    delta: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = ric::lemma1_forward_check(&matrix_arg(a)?, &x.inner, &xp.inner, delta, tol)
        .map_err(ric_err)?;
    to_py(py, &c)
}

#[pyfunction]
#[pyo3(signature = (a, s, x, delta_s, tol = DEFAULT_CHECK_TOL))]
fn lemma2_check<'py>(
    py: Python<'py>,
    a: &Bound<'py, PyAny>,
    s: Vec<usize>,
    x: &PySparseSignal,
    delta_s: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = ric::lemma2_check(&matrix_arg(a)?, &s, &x.inner, delta_s, tol).map_err(ric_err)?;
    to_py(py, &c)
}

#[pyfunction]
#[pyo3(signature = (a, x, j, delta, tol = DEFAULT_CHECK_TOL))]
fn coordinate_correlation_bound_check<'py>(
    py: Python<'py>,
    a: &Bound<'py, PyAny>,
    x: &PySparseSignal,
    j: usize,
    delta: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let c = ric::coordinate_correlation_bound_check(&matrix_arg(a)?, &x.inner, j, delta, tol)
        .map_err(ric_err)?;
    to_py(py, &c)
}

#[pyfunction]
#[allow(non_snake_case)]
fn build_b(K: usize) -> PyResult<PyMatrix> {
    counterexample::build_b(K)
        .map(|inner| PyMatrix { inner })
        .map_err(counterexample_err)
}

#[pyfunction]
#[allow(non_snake_case)]
fn closed_form_eigs(K: usize, t: f64) -> PyResult<Vec<f64>> {
    counterexample::closed_form_eigs(K, t).map_err(counterexample_err)
}

#[pyfunction]
#[allow(non_snake_case)]
#[pyo3(signature = (K, points = DEFAULT_GRID_POINTS))]
fn t_grid(K: usize, points: usize) -> Vec<f64> {
    counterexample::t_grid(K, points)
}

#[pyfunction]
#[allow(non_snake_case)]
fn build_instance(K: usize, t: f64) -> PyResult<PyInstance> {
    counterexample::build_instance(K, t)
        .map(|inner| PyInstance { inner })
        .map_err(counterexample_err)
}

/// Verifies the construction; raises `VerificationError` naming the failed clause.
#[pyfunction]
#[pyo3(signature = (instance, policy = "smallest", tol_eig = 1e-10, tol_ric = 1e-8, tol_corr = 1e-10, tol_tie = DEFAULT_TIE_TOL))]
fn witness_check<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    policy: &str,
    tol_eig: f64,
    tol_ric: f64,
    tol_corr: f64,
    tol_tie: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let tol = Tolerances {
        eig: tol_eig,
        ric: tol_ric,
        corr: tol_corr,
        tie: tol_tie,
    };
    let rep = counterexample::witness_check(&instance.inner, parse_policy(policy)?, &tol)
        .map_err(counterexample_err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[allow(non_snake_case)]
#[pyo3(signature = (K = 2, trials = 200, seed = 42, m = 8, n = 10, draws = 5, budget = DEFAULT_RIC_BUDGET))]
#[allow(clippy::too_many_arguments)]
fn gap_search<'py>(
    py: Python<'py>,
    K: usize,
    trials: usize,
    seed: u64,
    m: usize,
    n: usize,
    draws: usize,
    budget: u128,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = GapConfig {
        k: K,
        trials,
        seed,
        m,
        n,
        draws,
        budget,
    };
    let rep = py
        .detach(|| counterexample::gap_search(&cfg))
        .map_err(counterexample_err)?;
    to_py(py, &rep)
}

#[pyfunction]
#[allow(non_snake_case)]
#[pyo3(signature = (K = 2, m = 40, n = 12, matrices = 50, draws = 5, seed = 42, policy = "smallest", budget = DEFAULT_RIC_BUDGET))]
#[allow(clippy::too_many_arguments)]
fn run_sufficiency_suite<'py>(
    py: Python<'py>,
    K: usize,
    m: usize,
    n: usize,
    matrices: usize,
    draws: usize,
    seed: u64,
    policy: &str,
    budget: u128,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SufficiencyConfig {
        k: K,
        m,
        n,
        matrices,
        draws,
        seed,
        policy: parse_policy(policy)?,
        budget,
    };
    let rep = py
        .detach(|| sufficiency::run_sufficiency_suite(&cfg))
        .map_err(|e| match e {
            SufficiencyError::Ric(r) => ric_err(r),
            SufficiencyError::Recovery(r) => recovery_err(r),
            other => value_err(other),
        })?;
    to_py(py, &rep)
}

#[pymodule(name = "omprip")]
fn omprip_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("BudgetExceededError", py.get_type::<BudgetExceededError>())?;
    m.add("VerificationError", py.get_type::<VerificationError>())?;
    m.add_class::<PyMatrix>()?;
    m.add_class::<PySparseSignal>()?;
    m.add_class::<PyOmpTrace>()?;
    m.add_class::<PyRicReport>()?;
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(omp_run, m)?)?;
    m.add_function(wrap_pyfunction!(exact_recovery_check, m)?)?;
    m.add_function(wrap_pyfunction!(correlations, m)?)?;
    m.add_function(wrap_pyfunction!(l0_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(exact_ric, m)?)?;
    m.add_function(wrap_pyfunction!(ric_profile, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_conditions, m)?)?;
    m.add_function(wrap_pyfunction!(sharp_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(failure_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(lemma1_forward_check, m)?)?;
    m.add_function(wrap_pyfunction!(lemma2_check, m)?)?;
    m.add_function(wrap_pyfunction!(coordinate_correlation_bound_check, m)?)?;
    m.add_function(wrap_pyfunction!(build_b, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_eigs, m)?)?;
    m.add_function(wrap_pyfunction!(t_grid, m)?)?;
    m.add_function(wrap_pyfunction!(build_instance, m)?)?;
    m.add_function(wrap_pyfunction!(witness_check, m)?)?;
    m.add_function(wrap_pyfunction!(gap_search, m)?)?;
    m.add_function(wrap_pyfunction!(run_sufficiency_suite, m)?)?;
    Ok(())
}
