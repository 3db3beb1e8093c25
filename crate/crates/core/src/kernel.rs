//! Squared-exponential covariance function and its hyperparameters.
//!
//! Hyperparameters live in log-space so that every value reachable by an
//! unconstrained optimizer maps to strictly positive lengthscales and
//! variances. The flat vector view used by the optimizers is ordered
//! `[log ℓ_1, …, log ℓ_D, log s², log σ²]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};

/// Kernel and likelihood hyperparameters, stored in log-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NaturalHyperParams", into = "NaturalHyperParams")]
pub struct HyperParams {
    pub log_lengthscale: Vec<f64>,
    pub log_signal_variance: f64,
    pub log_noise_variance: f64,
}

/// Natural-space JSON form: `{"lengthscale": [..], "signal_variance": .., "noise_variance": ..}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct NaturalHyperParams {
    lengthscale: Vec<f64>,
    signal_variance: f64,
    noise_variance: f64,
}

impl TryFrom<NaturalHyperParams> for HyperParams {
    type Error = GpError;

    fn try_from(n: NaturalHyperParams) -> Result<Self> {
        HyperParams::new(&n.lengthscale, n.signal_variance, n.noise_variance)
    }
}

impl From<HyperParams> for NaturalHyperParams {
    fn from(h: HyperParams) -> Self {
        NaturalHyperParams {
            lengthscale: h.lengthscales(),
            signal_variance: h.signal_variance(),
            noise_variance: h.noise_variance(),
        }
    }
}

impl HyperParams {
    /// Builds hyperparameters from natural-space values, all of which must be
    /// finite and strictly positive.
    pub fn new(lengthscale: &[f64], signal_variance: f64, noise_variance: f64) -> Result<Self> {
        if lengthscale.is_empty() {
            return Err(GpError::InvalidInput(
                "at least one lengthscale is required".into(),
            ));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !lengthscale.iter().copied().all(positive) {
            return Err(GpError::InvalidInput(format!(
                "lengthscales must be positive and finite, got {lengthscale:?}"
            )));
        }
        if !positive(signal_variance) || !positive(noise_variance) {
            return Err(GpError::InvalidInput(format!(
                "variances must be positive and finite (signal {signal_variance}, noise {noise_variance})"
            )));
        }
        Ok(HyperParams {
            log_lengthscale: lengthscale.iter().map(|l| l.ln()).collect(),
            log_signal_variance: signal_variance.ln(),
            log_noise_variance: noise_variance.ln(),
        })
    }

    /// Same lengthscale in every one of `dim` input dimensions.
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        HyperParams::new(&vec![lengthscale; dim], signal_variance, noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscale.len()
    }

    /// Number of entries in the flat log-space parameter vector.
    pub fn n_params(&self) -> usize {
        self.dim() + 2
    }

    pub fn lengthscales(&self) -> Vec<f64> {
        self.log_lengthscale.iter().map(|l| l.exp()).collect()
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise_variance.exp()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.log_lengthscale.clone();
        v.push(self.log_signal_variance);
        v.push(self.log_noise_variance);
        v
    }

    pub fn from_vec(theta: &[f64]) -> Result<Self> {
        if theta.len() < 3 {
            return Err(GpError::shape("hyperparameter vector", 3, theta.len()));
        }
        let d = theta.len() - 2;
        Ok(HyperParams {
            log_lengthscale: theta[..d].to_vec(),
            log_signal_variance: theta[d],
            log_noise_variance: theta[d + 1],
        })
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Self {
        HyperParams {
            log_noise_variance: noise_variance.ln(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
}

/// A covariance function together with its hyperparameters.
///
/// `k(x, x') = s² ∏_d exp(−(x_d − x'_d)² / (2ℓ_d²))`
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    hyper: HyperParams,
    // cached 1/ℓ_d² and s²
    inv_ls2: Vec<f64>,
    signal_variance: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, hyper: HyperParams) -> Self {
        let inv_ls2 = hyper
            .log_lengthscale
            .iter()
            .map(|l| (-2.0 * l).exp())
            .collect();
        let signal_variance = hyper.signal_variance();
        KernelSpec {
            family,
            hyper,
            inv_ls2,
            signal_variance,
        }
    }

    pub fn squared_exponential(hyper: HyperParams) -> Self {
        KernelSpec::new(KernelFamily::SquaredExponential, hyper)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn with_hyper(&self, hyper: HyperParams) -> Self {
        KernelSpec::new(self.family, hyper)
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim()
    }

    /// `k(x, x)`, the prior variance at any point.
    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn noise_variance(&self) -> f64 {
        self.hyper.noise_variance()
    }

    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(GpError::shape("kernel input", self.dim(), x.len()));
        }
        if x2.len() != self.dim() {
            return Err(GpError::shape("kernel input", self.dim(), x2.len()));
        }
        let r2: f64 = x
            .iter()
            .zip(x2)
            .zip(&self.inv_ls2)
            .map(|((a, b), w)| (a - b) * (a - b) * w)
            .sum();
        Ok(self.signal_variance * (-0.5 * r2).exp())
    }

    /// Covariance between row `i` of `a` and row `j` of `b`. Dimensions are
    /// not checked.
    #[inline]
    pub fn eval_rows(&self, a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
        let mut r2 = 0.0;
        for (d, w) in self.inv_ls2.iter().enumerate() {
            let diff = a[(i, d)] - b[(j, d)];
            r2 += diff * diff * w;
        }
        self.signal_variance * (-0.5 * r2).exp()
    }

    /// Stationary form `k(τ)` for a one-dimensional lag in dimension `dim`,
    /// without the signal variance.
    #[inline]
    pub fn correlation_1d(&self, dim: usize, lag: f64) -> f64 {
        (-0.5 * lag * lag * self.inv_ls2[dim]).exp()
    }

    fn check_inputs(&self, a: &DMatrix<f64>) -> Result<()> {
        if a.ncols() != self.dim() {
            return Err(GpError::shape("kernel input columns", self.dim(), a.ncols()));
        }
        Ok(())
    }

    /// Cross-covariance matrix with entry `(i, j) = k(a_i, b_j)`.
    pub fn cross(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_inputs(a)?;
        self.check_inputs(b)?;
        Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
            self.eval_rows(a, i, b, j)
        }))
    }

    /// Symmetric Gram matrix `K(a, a)` without noise.
    pub fn gram(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_inputs(a)?;
        let n = a.nrows();
        let mut k = DMatrix::zeros(n, n);
        for j in 0..n {
            k[(j, j)] = self.signal_variance;
            for i in (j + 1)..n {
                let v = self.eval_rows(a, i, a, j);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// Diagonal of the Gram matrix, which for a stationary kernel is constant.
    pub fn gram_diag(&self, n: usize) -> DVector<f64> {
        DVector::from_element(n, self.signal_variance)
    }

    /// Derivatives of `K + σ²I` with respect to each log-space hyperparameter,
    /// in the order lengthscales, signal variance, noise variance.
    pub fn grad(&self, a: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_inputs(a)?;
        if a.nrows() == 0 {
            return Err(GpError::InvalidInput("gradient requires at least one input".into()));
        }
        let n = a.nrows();
        let k = self.gram(a)?;
        let mut out = Vec::with_capacity(self.hyper.n_params());
        for (d, w) in self.inv_ls2.iter().enumerate() {
            // ∂k/∂log ℓ_d = k · (x_d − x'_d)² / ℓ_d²
            out.push(DMatrix::from_fn(n, n, |i, j| {
                let diff = a[(i, d)] - a[(j, d)];
                k[(i, j)] * diff * diff * w
            }));
        }
        out.push(k);
        out.push(DMatrix::from_diagonal_element(n, n, self.noise_variance()));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn se(ls: &[f64], s2: f64, n2: f64) -> KernelSpec {
        KernelSpec::squared_exponential(HyperParams::new(ls, s2, n2).unwrap())
    }

    #[test]
    fn eval_closed_forms() {
        let k = se(&[1.0], 1.0, 0.1);
        assert_eq!(k.eval(&[0.3], &[0.3]).unwrap(), 1.0);
        assert_relative_eq!(k.eval(&[0.0], &[1.0]).unwrap(), (-0.5f64).exp(), max_relative = 1e-15);
        let k2 = se(&[1.0, 1.0], 1.0, 0.1);
        assert_relative_eq!(
            k2.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            (-0.5f64).exp() * (-0.5f64).exp(),
            max_relative = 1e-15
        );
        let k3 = se(&[2.0], 3.0, 0.1);
        assert_relative_eq!(k3.eval(&[5.0], &[5.0]).unwrap(), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let k = se(&[1.0, 1.0], 1.0, 0.1);
        assert!(matches!(k.eval(&[0.0], &[0.0, 1.0]), Err(GpError::Shape { .. })));
        let a = DMatrix::zeros(3, 1);
        assert!(k.cross(&a, &a).is_err());
        assert!(k.grad(&a).is_err());
    }

    #[test]
    fn cross_single_origin_point() {
        let k = se(&[0.7], 2.5, 0.1);
        let a = DMatrix::zeros(1, 1);
        let c = k.cross(&a, &a).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c[(0, 0)], 2.5);
    }

    #[test]
    fn cross_transpose_symmetry() {
        let k = se(&[0.8, 1.3], 1.7, 0.1);
        let a = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, -1.0, 0.5, 2.0, -0.3]);
        let b = DMatrix::from_row_slice(2, 2, &[0.4, 0.0, 1.1, -2.0]);
        let ab = k.cross(&a, &b).unwrap();
        let ba = k.cross(&b, &a).unwrap();
        assert_eq!(ab, ba.transpose());
        let aa = k.gram(&a).unwrap();
        assert_relative_eq!(aa.clone(), aa.transpose());
        assert_relative_eq!(aa, k.cross(&a, &a).unwrap(), max_relative = 1e-15);
    }

    #[test]
    fn cross_matches_entrywise_loop() {
        let k = se(&[0.9], 1.4, 0.1);
        let xs = [-0.83, 0.12, 1.91];
        let a = DMatrix::from_column_slice(3, 1, &xs);
        let c = k.cross(&a, &a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let direct = 1.4 * (-(xs[i] - xs[j]).powi(2) / (2.0 * 0.81)).exp();
                assert_relative_eq!(c[(i, j)], direct, max_relative = 1e-14);
                assert_eq!(c[(i, j)], k.eval(&[xs[i]], &[xs[j]]).unwrap());
            }
        }
    }

    #[test]
    fn signal_variance_derivative_is_kernel_itself() {
        let k = se(&[0.5], 2.0, 0.3);
        let a = DMatrix::from_column_slice(4, 1, &[0.0, 0.3, 0.9, -1.2]);
        let g = k.grad(&a).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[1], k.gram(&a).unwrap());
        assert_eq!(g[2], DMatrix::from_diagonal_element(4, 4, 0.3f64.ln().exp()));
        for i in 0..4 {
            assert_eq!(g[0][(i, i)], 0.0);
        }
    }

    #[test]
    fn lengthscale_gradient_matches_finite_differences() {
        let hyper = HyperParams::new(&[0.6, 1.4], 1.3, 0.2).unwrap();
        let k = KernelSpec::squared_exponential(hyper.clone());
        let a = DMatrix::from_row_slice(
            4,
            2,
            &[0.0, 0.1, 0.5, -0.4, -0.7, 0.9, 1.2, 0.3],
        );
        let g = k.grad(&a).unwrap();
        let theta = hyper.to_vec();
        let h = 1e-5;
        for p in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[p] += h;
            tm[p] -= h;
            let kp = KernelSpec::squared_exponential(HyperParams::from_vec(&tp).unwrap());
            let km = KernelSpec::squared_exponential(HyperParams::from_vec(&tm).unwrap());
            let noisy = |k: &KernelSpec| {
                k.gram(&a).unwrap() + DMatrix::from_diagonal_element(4, 4, k.noise_variance())
            };
            let fd = (noisy(&kp) - noisy(&km)) / (2.0 * h);
            let err = (&fd - &g[p]).norm() / g[p].norm().max(1e-300);
            assert!(err < 1e-6, "param {p}: rel err {err}");
        }
    }

    #[test]
    fn json_is_natural_space() {
        let h = HyperParams::new(&[0.5, 2.0], 1.5, 0.01).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_relative_eq!(v["lengthscale"][1].as_f64().unwrap(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(v["signal_variance"].as_f64().unwrap(), 1.5, max_relative = 1e-15);
        assert_relative_eq!(v["noise_variance"].as_f64().unwrap(), 0.01, max_relative = 1e-15);
        let back: HyperParams = serde_json::from_str(&s).unwrap();
        assert_relative_eq!(back.signal_variance(), 1.5, max_relative = 1e-15);
        let bad = r#"{"lengthscale":[1.0],"signal_variance":-1.0,"noise_variance":0.1}"#;
        assert!(serde_json::from_str::<HyperParams>(bad).is_err());
    }
}
