#![allow(dead_code)]

use factorgp::{Dataset, HyperParams, KernelSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn se(ls: &[f64], s2: f64, noise: f64) -> KernelSpec {
    KernelSpec::squared_exponential(HyperParams::new(ls, s2, noise).unwrap())
}

/// Squared-exponential covariance written out entry by entry.
pub fn se_cross(a: &DMatrix<f64>, b: &DMatrix<f64>, ls: &[f64], s2: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let r2: f64 = (0..a.ncols()).map(|d| ((a[(i, d)] - b[(j, d)]) / ls[d]).powi(2)).sum();
        s2 * (-0.5 * r2).exp()
    })
}

pub fn se_cov(x: &DMatrix<f64>, ls: &[f64], s2: f64, noise: f64) -> DMatrix<f64> {
    let n = x.nrows();
    se_cross(x, x, ls, s2) + DMatrix::identity(n, n) * noise
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn data_1d(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Dataset {
    let x = uniform(rng, n, lo, hi);
    let y = normal(rng, n);
    Dataset::from_1d(&x, &y).unwrap()
}

pub fn col(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(x.len(), 1, x)
}

pub fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// NLML from an explicit inverse and LU determinant.
pub fn nlml_by_inverse(c: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let inv = c.clone().try_inverse().unwrap();
    let n = y.len() as f64;
    0.5 * y.dot(&(&inv * y)) + 0.5 * c.determinant().ln() + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}
