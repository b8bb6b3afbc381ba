//! Seeded random inputs shared by tests, suites and model construction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dform::MetricAtPoint;

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random symmetric matrix with entries in [-1, 1).
pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Random SPD matrix `I + 0.5·BᵀB/n` (well conditioned, not diagonal).
pub fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut g = DMatrix::identity(n, n) + (b.transpose() * &b) * (0.5 / n as f64);
    g = (&g + g.transpose()) * 0.5;
    g
}

pub fn random_metric(n: usize, rng: &mut impl Rng) -> MetricAtPoint {
    MetricAtPoint::new(random_spd(n, rng)).expect("random SPD matrix")
}

/// Random matrix whose columns are orthonormal for `m`.
pub fn random_orthonormal_frame(m: &MetricAtPoint, rng: &mut impl Rng) -> DMatrix<f64> {
    let n = m.dim();
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    m.orthonormal_frame() * q
}
