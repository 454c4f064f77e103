//! Seeded random matrices and signals.
//!
//! Every generator takes an explicit RNG; [`rng_for`] derives independent
//! streams from `(seed, index)` so parallel trials stay reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numerics::{dot, DenseMatrix};
use crate::sparse_recovery::SparseSignal;
use crate::subsets::Combinations;

/// Perturbation sizes cycled through by the near-orthogonal family.
pub const NEAR_ORTHOGONAL_EPS: [f64; 3] = [0.01, 0.05, 0.1];

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DenseMatrix::new(rows, cols, data).expect("gaussian samples are finite")
}

/// Gaussian matrix with every column scaled to unit norm.
pub fn column_normalized(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let mut a = gaussian(rows, cols, rng);
    a.normalize_columns();
    a
}

/// Random `rows x cols` matrix with orthonormal columns (`cols ≤ rows`).
pub fn orthonormal_columns(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    assert!(cols <= rows, "need cols <= rows for orthonormal columns");
    let g = gaussian(rows, cols, rng);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for mut v in g.columns() {
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for u in &q {
                let p = dot(u, &v);
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= p * ui);
            }
        }
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|vi| *vi /= norm);
        q.push(v);
    }
    DenseMatrix::from_columns(&q).expect("orthonormal columns are finite")
}

/// Orthonormal columns plus an `eps`-sized Gaussian perturbation, renormalized.
pub fn near_orthogonal(rows: usize, cols: usize, eps: f64, rng: &mut impl Rng) -> DenseMatrix {
    let q = orthonormal_columns(rows, cols, rng);
    let g = gaussian(rows, cols, rng);
    let scale = eps / (rows as f64).sqrt();
    let data = q
        .data()
        .iter()
        .zip(g.data())
        .map(|(a, b)| a + scale * b)
        .collect();
    let mut a = DenseMatrix::new(rows, cols, data).expect("finite");
    a.normalize_columns();
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Generator {
    ColumnNormalized,
    NearOrthogonal { eps: f64 },
}

/// The mixed ensemble: first half column-normalized Gaussian, second half
/// near-orthogonal with `eps` cycling through [`NEAR_ORTHOGONAL_EPS`].
pub fn mixed_generator(index: usize, total: usize) -> Generator {
    let half = total / 2;
    if index < half {
        Generator::ColumnNormalized
    } else {
        Generator::NearOrthogonal {
            eps: NEAR_ORTHOGONAL_EPS[(index - half) % NEAR_ORTHOGONAL_EPS.len()],
        }
    }
}

pub fn generate(gen: Generator, rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    match gen {
        Generator::ColumnNormalized => column_normalized(rows, cols, rng),
        Generator::NearOrthogonal { eps } => near_orthogonal(rows, cols, eps, rng),
    }
}

/// Coefficients with random signs and magnitudes in `[0.5, 2)`.
pub fn coefficients(count: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let mag = rng.random_range(0.5..2.0);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

/// Signal on `support` with [`coefficients`] values.
pub fn signal_on(len: usize, support: &[usize], rng: &mut impl Rng) -> SparseSignal {
    SparseSignal::new(len, support.to_vec(), coefficients(support.len(), rng))
        .expect("support comes from a valid subset and values are nonzero")
}

/// Random `k`-sparse signal with uniformly chosen support.
pub fn random_sparse(len: usize, k: usize, rng: &mut impl Rng) -> SparseSignal {
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    signal_on(len, &idx[..k], rng)
}

/// Every size-`k` support times `draws` coefficient vectors, in a fixed order.
pub fn support_sweep(len: usize, k: usize, draws: usize, rng: &mut impl Rng) -> Vec<SparseSignal> {
    let mut out = Vec::new();
    for support in Combinations::new(len, k) {
        for _ in 0..draws {
            out.push(signal_on(len, &support, rng));
        }
    }
    out
}
