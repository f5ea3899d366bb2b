//! Seeded random matrices. Every generator in the crate draws from
//! ChaCha8 so that runs are reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::{sym_eig, DenseMatrix};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard normal entries.
pub fn gaussian(rng: &mut Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    DenseMatrix::new(rows, cols, data).expect("gaussian entries are finite")
}

pub fn gaussian_vec(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn symmetric(rng: &mut Rng, n: usize) -> DenseMatrix {
    let g = gaussian(rng, n, n);
    g.add(&g.transpose()).expect("square").scale(0.5)
}

/// Random PSD matrix `G Gᵀ` of rank at most `rank`.
pub fn low_rank_psd(rng: &mut Rng, n: usize, rank: usize) -> DenseMatrix {
    let g = gaussian(rng, n, rank);
    g.matmul(&g.transpose()).expect("conformable")
}

/// Random `n×n` orthogonal matrix (eigenvectors of a random symmetric matrix).
pub fn orthogonal(rng: &mut Rng, n: usize) -> DenseMatrix {
    sym_eig(&symmetric(rng, n))
        .expect("random symmetric matrices are well conditioned for Jacobi")
        .eigenvectors
}
