//! Structured kernel interpolation: `K_XX ≈ W K_ZZ Wᵀ` with `K_ZZ` on a
//! regular grid, solved by conjugate gradients.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::cg::{cg_solve, LinearOperator};
use super::interp::{ski_weights, InterpWeights, RegularGrid};
use super::kron::KronOp;
use super::toeplitz::ToeplitzOp;
use crate::data::{Dataset, Prediction};
use crate::error::{GpError, Result};
use crate::kernel::KernelSpec;

/// Kernel matrix on grid points: Toeplitz for one dimension, Kronecker
/// product of per-axis factors otherwise.
#[derive(Debug, Clone)]
pub enum GridKernel {
    Toeplitz(ToeplitzOp),
    Kron(KronOp),
}

impl GridKernel {
    pub fn new(grid: &RegularGrid, spec: &KernelSpec) -> Result<Self> {
        if grid.dim() != spec.dim() {
            return Err(GpError::shape("grid dimension", spec.dim(), grid.dim()));
        }
        let s2 = spec.signal_variance();
        if grid.dim() == 1 {
            let axis = grid.axis(0);
            let col = axis
                .iter()
                .map(|z| s2 * spec.correlation_1d(0, z - axis[0]))
                .collect();
            return Ok(GridKernel::Toeplitz(ToeplitzOp::new(col)?));
        }
        let factors = (0..grid.dim())
            .map(|d| {
                let axis = grid.axis(d);
                let scale = if d == 0 { s2 } else { 1.0 };
                DMatrix::from_fn(axis.len(), axis.len(), |i, j| {
                    scale * spec.correlation_1d(d, axis[i] - axis[j])
                })
            })
            .collect();
        Ok(GridKernel::Kron(KronOp::new(factors)?))
    }

    pub fn len(&self) -> usize {
        match self {
            GridKernel::Toeplitz(t) => t.len(),
            GridKernel::Kron(k) => k.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mvm(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            GridKernel::Toeplitz(t) => t.mvm(v),
            GridKernel::Kron(k) => k.mvm(v),
        }
    }

    /// Eigenvalues in descending order. The Toeplitz case uses a dense
    /// symmetric eigendecomposition, which is fine at grid sizes used here.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = match self {
            GridKernel::Toeplitz(t) => SymmetricEigen::new(t.to_dense()).eigenvalues.iter().copied().collect(),
            GridKernel::Kron(k) => k.eigenvalues(),
        };
        ev.sort_by(|a: &f64, b: &f64| b.total_cmp(a));
        ev
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            GridKernel::Toeplitz(t) => t.to_dense(),
            GridKernel::Kron(k) => k.to_dense(),
        }
    }
}

/// `v ↦ W K_grid Wᵀ v + σ² v`.
#[derive(Debug, Clone)]
pub struct SkiOperator {
    weights: InterpWeights,
    kernel: GridKernel,
    noise: f64,
}

impl SkiOperator {
    pub fn new(weights: InterpWeights, kernel: GridKernel, noise: f64) -> Result<Self> {
        if weights.ncols() != kernel.len() {
            return Err(GpError::shape("SKI grid size", kernel.len(), weights.ncols()));
        }
        Ok(SkiOperator {
            weights,
            kernel,
            noise,
        })
    }

    pub fn weights(&self) -> &InterpWeights {
        &self.weights
    }

    pub fn kernel(&self) -> &GridKernel {
        &self.kernel
    }

    pub fn try_apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let grid_v = self.weights.t_matvec(v)?;
        let kv = self.kernel.mvm(&grid_v)?;
        let mut out = self.weights.matvec(&kv)?;
        out.axpy(self.noise, v, 1.0);
        Ok(out)
    }
}

impl LinearOperator for SkiOperator {
    fn dim(&self) -> usize {
        self.weights.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.try_apply(v).expect("operator shapes are checked at construction")
    }
}

/// `W (K_grid (Wᵀ v)) + σ² v`.
pub fn ski_apply(
    weights: &InterpWeights,
    kernel: &GridKernel,
    sigma2: f64,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    if weights.ncols() != kernel.len() {
        return Err(GpError::shape("SKI grid size", kernel.len(), weights.ncols()));
    }
    let kv = kernel.mvm(&weights.t_matvec(v)?)?;
    let mut out = weights.matvec(&kv)?;
    out.axpy(sigma2, v, 1.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkiConfig {
    pub cg_tol: f64,
    pub cg_maxit: usize,
}

impl Default for SkiConfig {
    fn default() -> Self {
        SkiConfig {
            cg_tol: 1e-6,
            cg_maxit: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkiModel {
    spec: KernelSpec,
    grid: RegularGrid,
    op: SkiOperator,
    y: DVector<f64>,
    alpha: DVector<f64>,
    cfg: SkiConfig,
    cg_iterations: usize,
}

impl SkiModel {
    pub fn fit(data: &Dataset, grid: &RegularGrid, spec: &KernelSpec, cfg: SkiConfig) -> Result<Self> {
        let kernel = GridKernel::new(grid, spec)?;
        let weights = ski_weights(data.x(), grid)?;
        let op = SkiOperator::new(weights, kernel, spec.noise_variance())?;
        let solve = cg_solve(&op, data.y(), cfg.cg_tol, cfg.cg_maxit)?;
        Ok(SkiModel {
            spec: spec.clone(),
            grid: grid.clone(),
            op,
            y: data.y().clone(),
            alpha: solve.x,
            cfg,
            cg_iterations: solve.iterations,
        })
    }

    pub fn grid(&self) -> &RegularGrid {
        &self.grid
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn cg_iterations(&self) -> usize {
        self.cg_iterations
    }

    /// Mean `W* K_ZZ Wᵀ α`; variance `w*ᵀ K_ZZ w* − uᵀ (W K_ZZ Wᵀ + σ²I)⁻¹ u`
    /// with `u = W K_ZZ w*`, one CG solve per test point.
    pub fn predict(&self, xstar: &DMatrix<f64>) -> Result<Prediction> {
        let w_star = ski_weights(xstar, &self.grid)?;
        let kernel = self.op.kernel();
        let weights = self.op.weights();
        let grid_alpha = kernel.mvm(&weights.t_matvec(&self.alpha)?)?;
        let mean = w_star.matvec(&grid_alpha)?;
        let m = kernel.len();
        let mut variance = DVector::zeros(xstar.nrows());
        let mut e = DVector::zeros(m);
        for i in 0..xstar.nrows() {
            let (cols, vals) = w_star.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                e[c] += v;
            }
            let k_grid = kernel.mvm(&e)?;
            let prior: f64 = k_grid.dot(&e);
            let u = weights.matvec(&k_grid)?;
            let solve = cg_solve(&self.op, &u, self.cfg.cg_tol, self.cfg.cg_maxit)?;
            variance[i] = (prior - u.dot(&solve.x)).max(0.0);
            for &c in cols {
                e[c] = 0.0;
            }
        }
        Ok(Prediction { mean, variance })
    }

    /// NLML with the quadratic term from CG and the log-determinant from
    /// scaled grid eigenvalues, `Σ_{i≤n} log((n/m) λ_i + σ²)`.
    pub fn nlml_approx(&self) -> f64 {
        let n = self.y.len();
        let m = self.op.kernel().len();
        let noise = self.spec.noise_variance();
        let eig = self.op.kernel().eigenvalues();
        let scale = n as f64 / m as f64;
        let log_det: f64 = (0..n)
            .map(|i| {
                let lambda = eig.get(i).copied().unwrap_or(0.0).max(0.0);
                (scale * lambda + noise).ln()
            })
            .sum();
        0.5 * self.y.dot(&self.alpha) + 0.5 * log_det + 0.5 * n as f64 * (2.0 * PI).ln()
    }
}

pub fn ski_predict(
    data: &Dataset,
    grid: &RegularGrid,
    spec: &KernelSpec,
    xstar: &DMatrix<f64>,
) -> Result<Prediction> {
    SkiModel::fit(data, grid, spec, SkiConfig::default())?.predict(xstar)
}

pub fn ski_nlml_approx(data: &Dataset, grid: &RegularGrid, spec: &KernelSpec) -> Result<f64> {
    Ok(SkiModel::fit(data, grid, spec, SkiConfig::default())?.nlml_approx())
}
