//! One-dimensional sinc toy problem.

use std::f64::consts::PI;

use factorgp::Dataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{CliError, Result};

pub const INPUT_RANGE: (f64, f64) = (-10.0, 10.0);
pub const NOISE_VARIANCE: f64 = 0.2;
pub const TEST_GRID_LEN: usize = 400;

/// Normalized sinc, `sin(πx)/(πx)`, with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Noise-free generator `0.02x + sinc(x)`.
pub fn truth(x: f64) -> f64 {
    0.02 * x + sinc(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyData {
    pub data: Dataset,
    pub test_x: Vec<f64>,
    pub truth: Vec<f64>,
}

impl ToyData {
    pub fn test_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.test_x.len(), 1, &self.test_x)
    }
}

pub fn test_grid() -> Vec<f64> {
    let (lo, hi) = INPUT_RANGE;
    let step = (hi - lo) / (TEST_GRID_LEN - 1) as f64;
    (0..TEST_GRID_LEN)
        .map(|i| if i + 1 == TEST_GRID_LEN { hi } else { lo + step * i as f64 })
        .collect()
}

/// `n` noisy samples with inputs uniform on [`INPUT_RANGE`]; deterministic
/// in `seed`.
pub fn gen_toy(n: usize, seed: u64) -> Result<ToyData> {
    if n == 0 {
        return Err(CliError::Config("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_VARIANCE.sqrt()).expect("valid normal");
    let (lo, hi) = INPUT_RANGE;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = rng.random_range(lo..hi);
        x.push(xi);
        y.push(truth(xi) + rng.sample(noise));
    }
    let test_x = test_grid();
    let truth = test_x.iter().map(|&t| truth(t)).collect();
    Ok(ToyData {
        data: Dataset::from_1d(&x, &y)?,
        test_x,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_at_special_points() {
        assert_eq!(truth(0.0), 1.0);
        assert!((truth(1.0) - 0.02).abs() < 1e-15);
        assert!(sinc(2.0).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_data() {
        let a = gen_toy(50, 7).unwrap();
        let b = gen_toy(50, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data.y(), gen_toy(50, 8).unwrap().data.y());
    }

    #[test]
    fn grid_and_inputs_in_range() {
        let toy = gen_toy(200, 1).unwrap();
        assert_eq!(toy.test_x.len(), TEST_GRID_LEN);
        assert_eq!(toy.test_x[0], -10.0);
        assert_eq!(toy.test_x[TEST_GRID_LEN - 1], 10.0);
        assert!(toy.data.x().iter().all(|&v| (-10.0..10.0).contains(&v)));
        assert!(gen_toy(0, 1).is_err());
    }

    #[test]
    fn noise_has_the_stated_variance() {
        let toy = gen_toy(20_000, 3).unwrap();
        let resid: Vec<f64> = toy
            .data
            .x()
            .iter()
            .zip(toy.data.y().iter())
            .map(|(&x, &y)| y - truth(x))
            .collect();
        let var = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
        assert!((var - NOISE_VARIANCE).abs() < 0.01, "{var}");
    }
}
