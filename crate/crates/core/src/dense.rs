//! Exact GP regression through a dense Cholesky factorization of `K + σ²I`.
//!
//! This backend is O(n³) and serves as the reference every approximate
//! backend is checked against.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Prediction};
use crate::error::{GpError, Result};
use crate::kernel::KernelSpec;
use crate::linalg;

/// Full predictive distribution: mean and joint covariance.
#[derive(Debug, Clone)]
pub struct ExactPrediction {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl ExactPrediction {
    pub fn marginals(&self) -> Prediction {
        Prediction {
            mean: self.mean.clone(),
            variance: self.cov.diagonal(),
        }
    }
}

/// Factorized exact posterior.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    data: Dataset,
    spec: KernelSpec,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    prior_mean: f64,
    jitter: f64,
}

/// Builds `K + σ²I` and its lower Cholesky factor, retrying once with a
/// jitter of `1e-8 · mean(diag)`. Returns the factor and the jitter used.
pub(crate) fn factor_noisy_gram(x: &DMatrix<f64>, spec: &KernelSpec) -> Result<(DMatrix<f64>, f64)> {
    let mut k = spec.gram(x)?;
    let noise = spec.noise_variance();
    for i in 0..k.nrows() {
        k[(i, i)] += noise;
    }
    if let Some(l) = linalg::cholesky_lower(&k) {
        return Ok((l, 0.0));
    }
    let jitter = 1e-8 * k.diagonal().mean();
    for i in 0..k.nrows() {
        k[(i, i)] += jitter;
    }
    linalg::cholesky_lower(&k)
        .map(|l| (l, jitter))
        .ok_or(GpError::IllConditioned { jitter })
}

fn check_dim(spec: &KernelSpec, data: &Dataset) -> Result<()> {
    if spec.dim() != data.dim() {
        return Err(GpError::shape("kernel dimension", data.dim(), spec.dim()));
    }
    Ok(())
}

impl ExactPosterior {
    pub fn fit(data: &Dataset, spec: &KernelSpec) -> Result<Self> {
        Self::fit_with_prior_mean(data, spec, 0.0)
    }

    /// Fit with a constant prior mean `f̄`; targets are centred on it and it
    /// is added back to predictions.
    pub fn fit_with_prior_mean(data: &Dataset, spec: &KernelSpec, prior_mean: f64) -> Result<Self> {
        check_dim(spec, data)?;
        let (chol, jitter) = factor_noisy_gram(data.x(), spec)?;
        let centred = data.y().add_scalar(-prior_mean);
        let alpha = linalg::cholesky_solve_vec(&chol, &centred);
        Ok(ExactPosterior {
            data: data.clone(),
            spec: spec.clone(),
            chol,
            alpha,
            prior_mean,
            jitter,
        })
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Diagonal jitter that had to be added on top of `σ²` (usually zero).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn check_test(&self, xstar: &DMatrix<f64>) -> Result<()> {
        if xstar.ncols() != self.data.dim() {
            return Err(GpError::shape("test input columns", self.data.dim(), xstar.ncols()));
        }
        Ok(())
    }

    /// Predictive mean and full covariance of the latent function at `xstar`.
    pub fn predict(&self, xstar: &DMatrix<f64>) -> Result<ExactPrediction> {
        self.check_test(xstar)?;
        let k_sx = self.spec.cross(xstar, self.data.x())?;
        let mean = (&k_sx * &self.alpha).add_scalar(self.prior_mean);
        let mut v = k_sx.transpose();
        linalg::solve_lower_in_place(&self.chol, &mut v);
        let mut cov = self.spec.gram(xstar)? - v.transpose() * &v;
        // symmetrize away rounding
        let n = cov.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        Ok(ExactPrediction { mean, cov })
    }

    /// Predictive mean and marginal variances only; avoids the `n*×n*` covariance.
    pub fn predict_marginal(&self, xstar: &DMatrix<f64>) -> Result<Prediction> {
        self.check_test(xstar)?;
        let k_sx = self.spec.cross(xstar, self.data.x())?;
        let mean = (&k_sx * &self.alpha).add_scalar(self.prior_mean);
        let mut v = k_sx.transpose();
        linalg::solve_lower_in_place(&self.chol, &mut v);
        let s2 = self.spec.signal_variance();
        let variance = DVector::from_iterator(
            v.ncols(),
            v.column_iter().map(|c| s2 - c.norm_squared()),
        );
        Ok(Prediction { mean, variance })
    }

    /// `½ yᵀ(K+σ²I)⁻¹y + ½ log|K+σ²I| + (n/2) log 2π`.
    pub fn nlml(&self) -> f64 {
        let n = self.data.len() as f64;
        let centred = self.data.y().add_scalar(-self.prior_mean);
        0.5 * centred.dot(&self.alpha)
            + 0.5 * linalg::cholesky_log_det(&self.chol)
            + 0.5 * n * (2.0 * PI).ln()
    }

    /// Gradient of [`nlml`](Self::nlml) over the log-space hyperparameters,
    /// `½ tr((K_n⁻¹ − ααᵀ) ∂K_n/∂θ_j)`.
    pub fn nlml_grad(&self) -> Result<DVector<f64>> {
        let kinv = linalg::cholesky_inverse(&self.chol);
        let w = kinv - &self.alpha * self.alpha.transpose();
        let grads = self.spec.grad(self.data.x())?;
        Ok(DVector::from_iterator(
            grads.len(),
            grads.iter().map(|dk| 0.5 * w.component_mul(dk).sum()),
        ))
    }
}

pub fn exact_fit(data: &Dataset, spec: &KernelSpec) -> Result<ExactPosterior> {
    ExactPosterior::fit(data, spec)
}

pub fn exact_predict(post: &ExactPosterior, xstar: &DMatrix<f64>) -> Result<ExactPrediction> {
    post.predict(xstar)
}

pub fn exact_nlml(data: &Dataset, spec: &KernelSpec) -> Result<f64> {
    Ok(ExactPosterior::fit(data, spec)?.nlml())
}

pub fn exact_nlml_grad(data: &Dataset, spec: &KernelSpec) -> Result<DVector<f64>> {
    ExactPosterior::fit(data, spec)?.nlml_grad()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::HyperParams;
    use approx::assert_relative_eq;

    fn spec(ls: f64, s2: f64, n2: f64) -> KernelSpec {
        KernelSpec::squared_exponential(HyperParams::new(&[ls], s2, n2).unwrap())
    }

    #[test]
    fn scalar_case() {
        let data = Dataset::from_1d(&[0.4], &[1.5]).unwrap();
        let s = spec(1.0, 2.0, 0.5);
        let post = ExactPosterior::fit(&data, &s).unwrap();
        assert_relative_eq!(post.alpha()[0], 1.5 / 2.5, max_relative = 1e-14);
        let zero = Dataset::from_1d(&[0.4], &[0.0]).unwrap();
        assert_relative_eq!(
            exact_nlml(&zero, &s).unwrap(),
            0.5 * 2.5f64.ln() + 0.5 * (2.0 * PI).ln(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn zero_targets_give_zero_alpha() {
        let data = Dataset::from_1d(&[0.0, 1.0, 2.5], &[0.0; 3]).unwrap();
        let post = ExactPosterior::fit(&data, &spec(1.0, 1.0, 0.1)).unwrap();
        assert!(post.alpha().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn far_test_point_reverts_to_prior() {
        let data = Dataset::from_1d(&[-1.0, 0.0, 1.0], &[0.5, -1.0, 2.0]).unwrap();
        let s = spec(0.5, 1.7, 0.1);
        let post = ExactPosterior::fit(&data, &s).unwrap();
        let xs = DMatrix::from_column_slice(1, 1, &[1.0 + 20.0 * 0.5]);
        let p = post.predict(&xs).unwrap();
        assert!(p.mean[0].abs() < 1e-12);
        assert_relative_eq!(p.cov[(0, 0)], 1.7, max_relative = 1e-12);
    }

    #[test]
    fn near_interpolation_at_training_points() {
        let xs = [-2.0, -0.5, 0.7, 1.9];
        let ys = [0.3, -0.2, 1.1, 0.4];
        let data = Dataset::from_1d(&xs, &ys).unwrap();
        let post = ExactPosterior::fit(&data, &spec(1.0, 1.0, 1e-12)).unwrap();
        let p = post.predict(data.x()).unwrap();
        for i in 0..4 {
            assert!((p.mean[i] - ys[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn scaling_targets_quadruples_quadratic_term() {
        let xs = [-1.0, 0.2, 0.9, 2.0];
        let ys = [0.3, -0.7, 1.2, 0.1];
        let s = spec(0.8, 1.2, 0.2);
        let base = ExactPosterior::fit(&Dataset::from_1d(&xs, &ys).unwrap(), &s).unwrap();
        let ys2: Vec<f64> = ys.iter().map(|y| 2.0 * y).collect();
        let scaled = ExactPosterior::fit(&Dataset::from_1d(&xs, &ys2).unwrap(), &s).unwrap();
        let quad = |p: &ExactPosterior| 0.5 * p.data().y().dot(p.alpha());
        assert_relative_eq!(quad(&scaled), 4.0 * quad(&base), max_relative = 1e-12);
        assert_relative_eq!(
            scaled.nlml() - quad(&scaled),
            base.nlml() - quad(&base),
            max_relative = 1e-12
        );
    }

    #[test]
    fn large_noise_limit_of_noise_gradient() {
        let xs = [-1.0, 0.0, 1.0, 2.0, 3.0];
        let ys = [0.5, -1.0, 2.0, 0.3, -0.4];
        let data = Dataset::from_1d(&xs, &ys).unwrap();
        let noise = 1e8;
        let g = exact_nlml_grad(&data, &spec(1.0, 1.0, noise)).unwrap();
        let yty: f64 = ys.iter().map(|y| y * y).sum();
        let expected = 0.5 * (5.0 - yty / noise);
        assert_relative_eq!(g[2], expected, max_relative = 1e-6);
    }

    #[test]
    fn zero_targets_have_no_quadratic_signal_gradient() {
        let data = Dataset::from_1d(&[0.0, 0.5, 1.5], &[0.0; 3]).unwrap();
        let s = spec(1.0, 1.3, 0.2);
        let post = ExactPosterior::fit(&data, &s).unwrap();
        let g = post.nlml_grad().unwrap();
        let kinv = linalg::cholesky_inverse(post.chol());
        let dk = &s.grad(data.x()).unwrap()[1];
        assert_relative_eq!(g[1], 0.5 * kinv.component_mul(dk).sum(), max_relative = 1e-12);
    }

    #[test]
    fn prior_mean_shifts_predictions() {
        let data = Dataset::from_1d(&[0.0, 1.0], &[5.0, 5.0]).unwrap();
        let s = spec(1.0, 1.0, 0.1);
        let post = ExactPosterior::fit_with_prior_mean(&data, &s, 5.0).unwrap();
        assert!(post.alpha().iter().all(|a| a.abs() < 1e-14));
        let p = post.predict_marginal(&DMatrix::from_column_slice(1, 1, &[40.0])).unwrap();
        assert_relative_eq!(p.mean[0], 5.0);
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let data = Dataset::from_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap();
        let post = ExactPosterior::fit(&data, &spec(1.0, 1.0, 0.1)).unwrap();
        assert!(post.predict(&DMatrix::zeros(2, 2)).is_err());
        let s2 = KernelSpec::squared_exponential(HyperParams::isotropic(2, 1.0, 1.0, 0.1).unwrap());
        assert!(ExactPosterior::fit(&data, &s2).is_err());
    }

    #[test]
    fn duplicate_points_fall_back_to_jitter_or_fail() {
        // Tiny noise plus exact duplicates: the first factorization may fail
        // and the single retry has to rescue it.
        let data = Dataset::from_1d(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        let s = KernelSpec::squared_exponential(HyperParams {
            log_lengthscale: vec![0.0],
            log_signal_variance: 0.0,
            log_noise_variance: -800.0,
        });
        match ExactPosterior::fit(&data, &s) {
            Ok(post) => assert!(post.jitter() > 0.0),
            Err(GpError::IllConditioned { jitter }) => assert!(jitter > 0.0),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
