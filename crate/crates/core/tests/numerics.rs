mod common;

use approx::assert_abs_diff_eq;
use omprip::ensemble::{column_normalized, gaussian, rng_for};
use omprip::numerics::{dot, norm2, sym_eigen};
use omprip::{gram_submatrix, least_squares, spd_upper_factor, sym_eigenvalues, DenseMatrix};
use proptest::prelude::*;

fn spd(dim: usize, seed: u64) -> DenseMatrix {
    let mut rng = rng_for(seed, 0);
    let g = gaussian(dim + 2, dim, &mut rng);
    g.transpose()
        .matmul(&g)
        .unwrap()
        .shift_diagonal(-0.1)
        .unwrap()
}

#[test]
fn eigenvalues_agree_with_nalgebra() {
    for seed in 0..40 {
        let s = spd(2 + (seed as usize % 7), seed);
        let ours = sym_eigenvalues(&s, 1e-12).unwrap();
        let oracle = common::na_eigenvalues(&common::to_na(&s));
        for (a, b) in ours.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10 * s.max_abs());
        }
    }
}

#[test]
fn eigenvectors_diagonalize() {
    let s = spd(6, 3);
    let e = sym_eigen(&s, 1e-12).unwrap();
    for (i, lam) in e.values.iter().enumerate() {
        let v = e.vectors.column(i);
        let sv = s.mul_vec(&v).unwrap();
        for (p, q) in sv.iter().zip(&v) {
            assert_abs_diff_eq!(*p, lam * q, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(norm2(&v), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn eigen_is_bitwise_deterministic() {
    let s = spd(8, 11);
    assert_eq!(
        sym_eigenvalues(&s, 1e-12).unwrap(),
        sym_eigenvalues(&s, 1e-12).unwrap()
    );
}

#[test]
fn seeded_least_squares_recovers_coefficients() {
    let mut rng = rng_for(7, 0);
    let a = gaussian(4, 6, &mut rng);
    let at = a.select_columns(&[0, 1]).unwrap();
    let y = at.mul_vec(&[3.0, -1.0]).unwrap();
    let z = least_squares(&at, &y).unwrap();
    assert_abs_diff_eq!(z[0], 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(z[1], -1.0, epsilon = 1e-12);
}

#[test]
fn least_squares_matches_svd_oracle() {
    for seed in 0..20 {
        let mut rng = rng_for(seed, 1);
        let a = gaussian(9, 4, &mut rng);
        let y = gaussian(9, 1, &mut rng).column(0);
        let ours = least_squares(&a, &y).unwrap();
        let oracle = common::na_least_squares(&a, &y);
        for (p, q) in ours.iter().zip(&oracle) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-10);
        }
    }
}

#[test]
fn gram_of_single_column_is_squared_norm() {
    let mut rng = rng_for(5, 0);
    let a = gaussian(5, 4, &mut rng);
    let g = gram_submatrix(&a, &[2]).unwrap();
    let c = a.column(2);
    assert_abs_diff_eq!(g.get(0, 0), dot(&c, &c), epsilon = 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factorization_is_exact(dim in 1usize..9, seed in any::<u64>()) {
        let c = spd(dim, seed);
        let r = spd_upper_factor(&c).unwrap();
        let back = r.transpose().matmul(&r).unwrap();
        prop_assert!(back.max_abs_diff(&c).unwrap() <= 1e-10 * c.max_abs() * dim as f64);
        for i in 0..dim {
            for j in 0..i {
                prop_assert_eq!(r.get(i, j), 0.0);
            }
        }
        prop_assert!(sym_eigenvalues(&back, 1e-12).unwrap().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn least_squares_residual_is_orthogonal(rows in 4usize..12, cols in 1usize..4, seed in any::<u64>()) {
        let mut rng = rng_for(seed, 0);
        let a = column_normalized(rows, cols, &mut rng);
        let y = gaussian(rows, 1, &mut rng).column(0);
        let z = least_squares(&a, &y).unwrap();
        let fit = a.mul_vec(&z).unwrap();
        let r: Vec<f64> = y.iter().zip(&fit).map(|(p, q)| p - q).collect();
        for j in 0..cols {
            let aj = a.column(j);
            prop_assert!(dot(&aj, &r).abs() <= 1e-10 * norm2(&y) * norm2(&aj));
        }
    }

    #[test]
    fn gram_respects_permutation(seed in any::<u64>(), perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
        let mut rng = rng_for(seed, 0);
        let a = gaussian(6, 7, &mut rng);
        let t = [1usize, 3, 4, 6];
        let tp: Vec<usize> = perm.iter().map(|&i| t[i]).collect();
        let g = gram_submatrix(&a, &t).unwrap();
        let gp = gram_submatrix(&a, &tp).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert_eq!(gp.get(i, j), g.get(perm[i], perm[j]));
            }
        }
    }
}
