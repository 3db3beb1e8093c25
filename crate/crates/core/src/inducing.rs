//! Inducing-point approximations: FITC and the VFE evidence lower bound.
//!
//! Both share the Nyström factor `Q_XX = V Vᵀ` with `V = K_XZ P`, where
//! `P = U_r Λ_r^{-1/2}` comes from the eigenvalues of `K_ZZ` above
//! [`EIGEN_CUTOFF`]·λ_max (a pseudo-inverse square root), and
//! both reduce every solve to an `r×r` core (`r ≤ m`) through Woodbury:
//!
//! ```text
//! C = V Vᵀ + Λ,   A = I + Vᵀ Λ⁻¹ V,
//! log|C| = Σ log Λ_ii + log|A|,   yᵀC⁻¹y = yᵀΛ⁻¹y − bᵀA⁻¹b,  b = VᵀΛ⁻¹y
//! ```
//!
//! FITC uses `Λ = diag(K − Q) + σ²I`; VFE uses `Λ = σ²I` plus the trace
//! penalty `tr(K − Q) / 2σ²`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{column_bounds, Dataset, Prediction};
use crate::error::{GpError, Result};
use crate::kernel::KernelSpec;
use crate::linalg;

/// Eigenvalues of `K_ZZ` at or below this fraction of the largest are
/// dropped. A fixed diagonal jitter would bias `Q` by the jitter in every
/// direction, so `Z = X` would no longer give `Q = K`.
pub const EIGEN_CUTOFF: f64 = 1e-16;

/// `m` pseudo-input locations, one per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct InducingSet {
    z: DMatrix<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for InducingSet {
    type Error = GpError;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(GpError::InvalidInput("inducing rows have differing lengths".into()));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        InducingSet::new(DMatrix::from_row_slice(m, d, &flat))
    }
}

impl From<InducingSet> for Vec<Vec<f64>> {
    fn from(s: InducingSet) -> Self {
        s.z.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

impl InducingSet {
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(GpError::InvalidInput("inducing set must be non-empty".into()));
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(GpError::InvalidInput("inducing locations must be finite".into()));
        }
        let m = z.nrows();
        for i in 0..m {
            for j in (i + 1)..m {
                if z.row(i) == z.row(j) {
                    return Err(GpError::DegenerateInducingSet);
                }
            }
        }
        Ok(InducingSet { z })
    }

    pub fn from_1d(z: &[f64]) -> Result<Self> {
        InducingSet::new(DMatrix::from_column_slice(z.len(), 1, z))
    }

    /// `m` locations spread evenly over the training-input range. In one
    /// dimension this is a linspace over `[min x, max x]`; in higher
    /// dimensions it is an index-spaced subset of the (distinct) training rows.
    pub fn evenly_spaced(data: &Dataset, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(GpError::InvalidInput("need at least one inducing point".into()));
        }
        if data.dim() == 1 {
            let (lo, hi) = data.bounds()[0];
            let pts: Vec<f64> = if m == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
            };
            return InducingSet::from_1d(&pts);
        }
        let n = data.len();
        let mut idx: Vec<usize> = (0..m.min(n))
            .map(|i| if m == 1 { n / 2 } else { i * (n - 1) / (m - 1).max(1) })
            .collect();
        idx.dedup();
        let rows: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| data.x().row(i).iter().copied().collect())
            .collect();
        let mut unique: Vec<Vec<f64>> = Vec::new();
        for r in rows {
            if !unique.contains(&r) {
                unique.push(r);
            }
        }
        InducingSet::try_from(unique)
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }
}

/// Nyström factorization `Q_XX = K_XZ K_ZZ⁺ K_ZX = V Vᵀ`.
#[derive(Debug, Clone)]
pub struct NystromFactor {
    pub k_xz: DMatrix<f64>,
    /// `m×r` whitening map `P` with `P Pᵀ = K_ZZ⁺` (truncated).
    pub whitener: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl NystromFactor {
    pub fn new(x: &DMatrix<f64>, z: &InducingSet, spec: &KernelSpec) -> Result<Self> {
        if z.dim() != spec.dim() {
            return Err(GpError::shape("inducing dimension", spec.dim(), z.dim()));
        }
        let whitener = inducing_whitener(z, spec)?;
        let k_xz = spec.cross(x, z.z())?;
        let v = &k_xz * &whitener;
        Ok(NystromFactor { k_xz, whitener, v })
    }

    /// `diag(Q_XX)`, the squared row norms of `V`.
    pub fn q_diag(&self) -> DVector<f64> {
        DVector::from_iterator(self.v.nrows(), self.v.row_iter().map(|r| r.norm_squared()))
    }

    pub fn q_dense(&self) -> DMatrix<f64> {
        &self.v * self.v.transpose()
    }

    /// `diag(K − Q)` for a stationary kernel with variance `s2`. Not
    /// clamped, so `diag(Q) + correction` reproduces `s2` to rounding.
    pub fn diag_correction(&self, s2: f64) -> DVector<f64> {
        self.q_diag().map(|q| s2 - q)
    }
}

fn inducing_whitener(z: &InducingSet, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    let eig = spec.gram(z.z())?.symmetric_eigen();
    let top = eig.eigenvalues.max();
    if !(top > 0.0) || !eig.eigenvalues.iter().all(|l| l.is_finite()) {
        return Err(GpError::DegenerateInducingSet);
    }
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > EIGEN_CUTOFF * top)
        .collect();
    let mut p = eig.eigenvectors.select_columns(&keep);
    for (mut col, &i) in p.column_iter_mut().zip(&keep) {
        col /= eig.eigenvalues[i].sqrt();
    }
    Ok(p)
}

/// Woodbury core for `C = V Vᵀ + diag(Λ)`.
#[derive(Debug, Clone)]
struct WoodburyCore {
    chol_a: DMatrix<f64>,
    beta: DVector<f64>,
    log_det: f64,
    quad: f64,
}

impl WoodburyCore {
    fn new(v: &DMatrix<f64>, lambda: &DVector<f64>, y: &DVector<f64>) -> Result<Self> {
        let m = v.ncols();
        let inv_lambda = lambda.map(|l| 1.0 / l);
        let mut scaled = v.clone();
        for (mut row, w) in scaled.row_iter_mut().zip(inv_lambda.iter()) {
            row *= *w;
        }
        let a = DMatrix::identity(m, m) + v.transpose() * &scaled;
        let chol_a = linalg::cholesky_lower(&a).ok_or(GpError::DegenerateInducingSet)?;
        let b = scaled.transpose() * y;
        let beta = linalg::cholesky_solve_vec(&chol_a, &b);
        let log_det = lambda.iter().map(|l| l.ln()).sum::<f64>() + linalg::cholesky_log_det(&chol_a);
        let quad = y.component_mul(&inv_lambda).dot(y) - b.dot(&beta);
        Ok(WoodburyCore {
            chol_a,
            beta,
            log_det,
            quad,
        })
    }

    /// Specialization for `Λ = noise·I`.
    fn homoscedastic(v: &DMatrix<f64>, noise: f64, y: &DVector<f64>) -> Result<Self> {
        let n = v.nrows();
        let m = v.ncols();
        let mut a = v.tr_mul(v) / noise;
        for i in 0..m {
            a[(i, i)] += 1.0;
        }
        let chol_a = linalg::cholesky_lower(&a).ok_or(GpError::DegenerateInducingSet)?;
        let b = v.tr_mul(y) / noise;
        let beta = linalg::cholesky_solve_vec(&chol_a, &b);
        let log_det = n as f64 * noise.ln() + linalg::cholesky_log_det(&chol_a);
        let quad = y.norm_squared() / noise - b.dot(&beta);
        Ok(WoodburyCore {
            chol_a,
            beta,
            log_det,
            quad,
        })
    }

    fn nlml(&self, n: usize) -> f64 {
        0.5 * self.quad + 0.5 * self.log_det + 0.5 * n as f64 * (2.0 * PI).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparseMethod {
    Fitc,
    Vfe,
}

/// Fitted FITC or VFE model.
#[derive(Debug, Clone)]
pub struct SparsePosterior {
    method: SparseMethod,
    z: InducingSet,
    spec: KernelSpec,
    whitener: DMatrix<f64>,
    core: WoodburyCore,
    n: usize,
    trace_kq: f64,
}

impl SparsePosterior {
    pub fn fit(method: SparseMethod, data: &Dataset, z: &InducingSet, spec: &KernelSpec) -> Result<Self> {
        if data.dim() != spec.dim() {
            return Err(GpError::shape("kernel dimension", data.dim(), spec.dim()));
        }
        let nys = NystromFactor::new(data.x(), z, spec)?;
        let s2 = spec.signal_variance();
        let noise = spec.noise_variance();
        let correction = nys.diag_correction(s2);
        let core = match method {
            SparseMethod::Fitc => {
                let lambda = correction.add_scalar(noise);
                if lambda.iter().any(|&l| !(l > 0.0)) {
                    return Err(GpError::DegenerateInducingSet);
                }
                WoodburyCore::new(&nys.v, &lambda, data.y())?
            }
            SparseMethod::Vfe => WoodburyCore::homoscedastic(&nys.v, noise, data.y())?,
        };
        Ok(SparsePosterior {
            method,
            z: z.clone(),
            spec: spec.clone(),
            whitener: nys.whitener,
            core,
            n: data.len(),
            // diag(K − Q) ≥ 0 in exact arithmetic
            trace_kq: correction.iter().map(|c| c.max(0.0)).sum(),
        })
    }

    pub fn method(&self) -> SparseMethod {
        self.method
    }

    pub fn inducing(&self) -> &InducingSet {
        &self.z
    }

    /// Negative log of `N(y | 0, C)` with `C` the method's effective
    /// covariance (FITC: `Q + diag(K−Q) + σ²I`; VFE: `Q + σ²I`).
    pub fn nlml(&self) -> f64 {
        self.core.nlml(self.n)
    }

    /// Collapsed variational bound
    /// `log N(y | 0, Q + σ²I) − tr(K − Q) / 2σ²`. Only meaningful for VFE.
    pub fn elbo(&self) -> f64 {
        -self.core.nlml(self.n) - self.trace_kq / (2.0 * self.spec.noise_variance())
    }

    /// Objective under the shared "negative log marginal likelihood"
    /// convention: FITC's approximate NLML, or VFE's negated bound.
    pub fn objective_nlml(&self) -> f64 {
        match self.method {
            SparseMethod::Fitc => self.nlml(),
            SparseMethod::Vfe => -self.elbo(),
        }
    }

    pub fn predict(&self, xstar: &DMatrix<f64>) -> Result<Prediction> {
        if xstar.ncols() != self.spec.dim() {
            return Err(GpError::shape("test input columns", self.spec.dim(), xstar.ncols()));
        }
        let k_sz = self.spec.cross(xstar, self.z.z())?;
        let v_s = k_sz * &self.whitener;
        let mean = &v_s * &self.core.beta;
        let mut w = v_s.transpose();
        linalg::solve_lower_in_place(&self.core.chol_a, &mut w);
        let s2 = self.spec.signal_variance();
        let variance = DVector::from_iterator(
            xstar.nrows(),
            (0..xstar.nrows()).map(|i| s2 - v_s.row(i).norm_squared() + w.column(i).norm_squared()),
        );
        Ok(Prediction { mean, variance })
    }
}

pub fn fitc_fit(data: &Dataset, z: &InducingSet, spec: &KernelSpec) -> Result<SparsePosterior> {
    SparsePosterior::fit(SparseMethod::Fitc, data, z, spec)
}

pub fn fitc_predict(post: &SparsePosterior, xstar: &DMatrix<f64>) -> Result<Prediction> {
    post.predict(xstar)
}

pub fn fitc_nlml(data: &Dataset, z: &InducingSet, spec: &KernelSpec) -> Result<f64> {
    Ok(fitc_fit(data, z, spec)?.nlml())
}

pub fn vfe_fit(data: &Dataset, z: &InducingSet, spec: &KernelSpec) -> Result<SparsePosterior> {
    SparsePosterior::fit(SparseMethod::Vfe, data, z, spec)
}

pub fn vfe_elbo(data: &Dataset, z: &InducingSet, spec: &KernelSpec) -> Result<f64> {
    Ok(vfe_fit(data, z, spec)?.elbo())
}

pub fn vfe_predict(
    data: &Dataset,
    z: &InducingSet,
    spec: &KernelSpec,
    xstar: &DMatrix<f64>,
) -> Result<Prediction> {
    vfe_fit(data, z, spec)?.predict(xstar)
}

/// Which quantity [`optimize_inducing`] maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InducingObjective {
    /// `log q_FITC(y)`
    Fitc,
    /// The VFE evidence lower bound.
    Vfe,
}

impl InducingObjective {
    pub fn evaluate(self, data: &Dataset, z: &InducingSet, spec: &KernelSpec) -> Result<f64> {
        match self {
            InducingObjective::Fitc => Ok(-fitc_nlml(data, z, spec)?),
            InducingObjective::Vfe => vfe_elbo(data, z, spec),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InducingOptimization {
    pub z: InducingSet,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Gradient ascent on the inducing locations with a backtracking line
/// search. Gradients are central finite differences; every iterate stays
/// inside `[min X − ℓ, max X + ℓ]` per dimension.
pub fn optimize_inducing(
    data: &Dataset,
    z0: &InducingSet,
    spec: &KernelSpec,
    objective: InducingObjective,
    steps: usize,
) -> Result<InducingOptimization> {
    let lengthscales = spec.hyper().lengthscales();
    let bounds: Vec<(f64, f64)> = column_bounds(data.x())
        .into_iter()
        .zip(&lengthscales)
        .map(|((lo, hi), l)| (lo - l, hi + l))
        .collect();
    let eval = |z: &DMatrix<f64>| -> f64 {
        InducingSet::new(z.clone())
            .and_then(|s| objective.evaluate(data, &s, spec))
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut z = z0.z().clone();
    let mut current = objective.evaluate(data, z0, spec)?;
    if !current.is_finite() {
        return Err(GpError::OptimizationDiverged { value: current });
    }
    let initial = current;
    let mut trace = vec![current];
    let min_ls = lengthscales.iter().cloned().fold(f64::INFINITY, f64::min);
    let step_tol = 1e-9 * min_ls;
    let mut step = 0.1 * min_ls;

    for _ in 0..steps {
        // central differences, step proportional to the lengthscale
        let mut grad = DMatrix::zeros(z.nrows(), z.ncols());
        for d in 0..z.ncols() {
            let h = 1e-6 * lengthscales[d];
            for i in 0..z.nrows() {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[(i, d)] += h;
                zm[(i, d)] -= h;
                grad[(i, d)] = (eval(&zp) - eval(&zm)) / (2.0 * h);
            }
        }
        if !grad.iter().all(|g| g.is_finite()) {
            break;
        }
        let gmax = grad.amax();
        if gmax <= 1e-8 * (1.0 + current.abs()) {
            break;
        }
        let mut accepted = false;
        while step > step_tol {
            let mut cand = &z + &grad * (step / gmax);
            for d in 0..cand.ncols() {
                let (lo, hi) = bounds[d];
                for i in 0..cand.nrows() {
                    cand[(i, d)] = cand[(i, d)].clamp(lo, hi);
                }
            }
            let value = eval(&cand);
            if value.is_finite() && value > current {
                z = cand;
                current = value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(current);
        step *= 2.0;
    }

    Ok(InducingOptimization {
        z: InducingSet::new(z)?,
        initial_objective: initial,
        final_objective: current,
        trace,
    })
}
