//! Dense linear-algebra kernels used by every other module.
//!
//! Everything here is a pure function of its inputs and runs in `f64`.
//! The eigenvalue routine is a cyclic Jacobi sweep with a fixed sweep cap,
//! so results are bit-for-bit reproducible for a fixed input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sweep cap for the Jacobi eigenvalue iteration.
const MAX_JACOBI_SWEEPS: usize = 100;

/// Relative symmetry tolerance accepted by [`spd_upper_factor`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative threshold on the triangular factor's diagonal below which a
/// least-squares system is declared rank deficient.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix shape {rows}x{cols} is invalid: {reason}")]
    InvalidShape {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix asymmetry {asymmetry:e} exceeds tolerance {tol:e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NumericalFailure { sweeps: usize },
    #[error("pivot {index} is {pivot:e}; matrix is not positive definite")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("columns are numerically dependent (ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("index {index} out of range for {len} columns")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("index {index} appears more than once")]
    DuplicateIndex { index: usize },
    #[error("index set is empty")]
    EmptyIndexSet,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Real `rows x cols` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = NumericsError;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DenseMatrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl From<DenseMatrix> for RawMatrix {
    fn from(m: DenseMatrix) -> Self {
        RawMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(NumericsError::InvalidShape {
                rows,
                cols,
                reason: "dimensions must be positive",
            });
        }
        if data.len() != rows * cols {
            return Err(NumericsError::InvalidShape {
                rows,
                cols,
                reason: "entry count does not match rows * cols",
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(NumericsError::InvalidShape {
                rows: r,
                cols: c,
                reason: "ragged rows",
            });
        }
        Self::new(r, c, rows.concat())
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|col| col.len() != r) {
            return Err(NumericsError::InvalidShape {
                rows: r,
                cols: c,
                reason: "ragged columns",
            });
        }
        let mut data = vec![0.0; r * c];
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                data[i * c + j] = *v;
            }
        }
        Self::new(r, c, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self::new(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Submatrix made of the listed columns, in the listed order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        validate_index_set(indices, self.cols)?;
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for i in 0..self.rows {
            data.extend(indices.iter().map(|&j| self.get(i, j)));
        }
        Ok(Self {
            rows: self.rows,
            cols: indices.len(),
            data,
        })
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(NumericsError::DimensionMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        Ok(self.data.chunks(self.cols).map(|row| dot(row, x)).collect())
    }

    /// `selfᵀ r`.
    pub fn tr_mul_vec(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.rows {
            return Err(NumericsError::DimensionMismatch {
                expected: self.rows,
                actual: r.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (row, &ri) in self.data.chunks(self.cols).zip(r) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * ri;
            }
        }
        Ok(out)
    }

    /// `self - shift * I`.
    pub fn shift_diagonal(&self, shift: f64) -> Result<Self> {
        if !self.is_square() {
            return Err(NumericsError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            out.data[i * self.cols + i] -= shift;
        }
        Ok(out)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch {
                expected: self.rows * self.cols,
                actual: other.rows * other.cols,
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.rows.min(self.cols);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// True when every entry strictly below the diagonal is exactly zero.
    pub fn is_upper_triangular(&self) -> bool {
        (0..self.rows).all(|i| (0..i.min(self.cols)).all(|j| self.get(i, j) == 0.0))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Scales every column to unit Euclidean norm; zero columns are left alone.
    pub fn normalize_columns(&mut self) {
        for j in 0..self.cols {
            let norm = (0..self.rows)
                .map(|i| self.get(i, j).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for i in 0..self.rows {
                    let v = self.get(i, j) / norm;
                    self.set(i, j, v);
                }
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn validate_index_set(indices: &[usize], len: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(NumericsError::EmptyIndexSet);
    }
    let mut seen = vec![false; len];
    for &index in indices {
        if index >= len {
            return Err(NumericsError::IndexOutOfRange { index, len });
        }
        if std::mem::replace(&mut seen[index], true) {
            return Err(NumericsError::DuplicateIndex { index });
        }
    }
    Ok(())
}

fn check_symmetric(s: &DenseMatrix, tol: f64) -> Result<()> {
    if !s.is_square() {
        return Err(NumericsError::NotSquare {
            rows: s.rows,
            cols: s.cols,
        });
    }
    let allowed = tol * s.max_abs().max(1.0);
    let asymmetry = s.max_asymmetry();
    if asymmetry > allowed {
        return Err(NumericsError::NotSymmetric {
            asymmetry,
            tol: allowed,
        });
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending, with multiplicity.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DenseMatrix,
}

/// Cyclic Jacobi eigen-decomposition of `(S + Sᵀ)/2`.
///
/// `tol` bounds the accepted asymmetry, relative to `max(1, ‖S‖_max)`.
pub fn sym_eigen(s: &DenseMatrix, tol: f64) -> Result<SymEigen> {
    check_symmetric(s, tol)?;
    let n = s.rows;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (s.get(i, j) + s.get(j, i));
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let total: f64 = a.iter().map(|x| x * x).sum();
    let threshold = (f64::EPSILON * f64::EPSILON) * total;
    let off = |a: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        acc
    };

    let mut converged = n == 1 || off(&a) <= threshold;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_JACOBI_SWEEPS {
            return Err(NumericsError::NumericalFailure {
                sweeps: MAX_JACOBI_SWEEPS,
            });
        }
        sweep += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
        converged = off(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, dst, v[k * n + src]);
        }
    }
    Ok(SymEigen { values, vectors })
}

/// All eigenvalues of the symmetrized matrix, ascending with multiplicity.
pub fn sym_eigenvalues(s: &DenseMatrix, tol: f64) -> Result<Vec<f64>> {
    sym_eigen(s, tol).map(|e| e.values)
}

/// Upper-triangular `R` with `RᵀR = C` for symmetric positive-definite `C`.
///
/// Entries below the diagonal are never written, so they are exactly zero.
pub fn spd_upper_factor(c: &DenseMatrix) -> Result<DenseMatrix> {
    check_symmetric(c, SYMMETRY_TOL)?;
    let n = c.rows;
    let mut r = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = c.get(j, j);
        for k in 0..j {
            pivot -= r.get(k, j).powi(2);
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(NumericsError::NotPositiveDefinite { index: j, pivot });
        }
        let rjj = pivot.sqrt();
        r.set(j, j, rjj);
        for i in (j + 1)..n {
            let mut acc = c.get(j, i);
            for k in 0..j {
                acc -= r.get(k, j) * r.get(k, i);
            }
            r.set(j, i, acc / rjj);
        }
    }
    Ok(r)
}

/// Minimizer of `‖y − A z‖₂` via Householder QR.
#[allow(clippy::needless_range_loop)]
pub fn least_squares(a: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let (m, p) = (a.rows, a.cols);
    if y.len() != m {
        return Err(NumericsError::DimensionMismatch {
            expected: m,
            actual: y.len(),
        });
    }
    if p > m {
        return Err(NumericsError::RankDeficient { ratio: 0.0 });
    }
    let mut qr = a.clone();
    let mut b = y.to_vec();
    let mut diag = vec![0.0; p];
    for j in 0..p {
        let norm = (j..m).map(|i| qr.get(i, j).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(NumericsError::RankDeficient { ratio: 0.0 });
        }
        let alpha = if qr.get(j, j) > 0.0 { -norm } else { norm };
        // v = x - alpha e_1, stored in place of column j
        let v0 = qr.get(j, j) - alpha;
        qr.set(j, j, v0);
        let vnorm2: f64 = (j..m).map(|i| qr.get(i, j).powi(2)).sum();
        for col in (j + 1)..p {
            let proj: f64 = (j..m).map(|i| qr.get(i, j) * qr.get(i, col)).sum();
            let f = 2.0 * proj / vnorm2;
            for i in j..m {
                let val = qr.get(i, col) - f * qr.get(i, j);
                qr.set(i, col, val);
            }
        }
        let proj: f64 = (j..m).map(|i| qr.get(i, j) * b[i]).sum();
        let f = 2.0 * proj / vnorm2;
        for (i, bi) in b.iter_mut().enumerate().skip(j) {
            *bi -= f * qr.get(i, j);
        }
        diag[j] = alpha;
    }
    let largest = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let smallest = diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    let ratio = smallest / largest;
    if ratio <= RANK_TOL {
        return Err(NumericsError::RankDeficient { ratio });
    }
    let mut z = vec![0.0; p];
    for j in (0..p).rev() {
        let mut acc = b[j];
        for (k, zk) in z.iter().enumerate().skip(j + 1) {
            acc -= qr.get(j, k) * zk;
        }
        z[j] = acc / diag[j];
    }
    Ok(z)
}

/// `|T| x |T|` Gram matrix of the listed columns.
pub fn gram_submatrix(a: &DenseMatrix, indices: &[usize]) -> Result<DenseMatrix> {
    validate_index_set(indices, a.cols)?;
    let cols: Vec<Vec<f64>> = indices.iter().map(|&j| a.column(j)).collect();
    let k = indices.len();
    let mut g = DenseMatrix::zeros(k, k);
    for p in 0..k {
        for q in p..k {
            let v = dot(&cols[p], &cols[q]);
            g.set(p, q, v);
            g.set(q, p, v);
        }
    }
    Ok(g)
}
