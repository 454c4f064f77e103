//! Independent reference computations backed by nalgebra.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use omprip::DenseMatrix;

pub fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.data())
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn na_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// δ_k by bitmask enumeration of column subsets, nalgebra eigenvalues.
pub fn brute_force_ric(a: &DenseMatrix, k: usize) -> f64 {
    let full = to_na(a);
    let n = a.cols();
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let sub = full.select_columns(&cols);
        let eig = na_eigenvalues(&(sub.transpose() * &sub));
        best = best.max(eig[eig.len() - 1] - 1.0).max(1.0 - eig[0]);
    }
    best
}

/// Least squares through nalgebra's SVD.
pub fn na_least_squares(a: &DenseMatrix, y: &[f64]) -> Vec<f64> {
    let m = to_na(a);
    let b = nalgebra::DVector::from_column_slice(y);
    m.svd(true, true)
        .solve(&b, 1e-14)
        .expect("svd solve")
        .iter()
        .copied()
        .collect()
}
