use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::chain::HodlrFactorChain;
use super::cholesky::HodlrCholesky;
use super::matrix::{hodlr_assemble, HodlrDiagnostics, HodlrMatrix};
use super::partition::PermutationRecord;
use crate::data::{Dataset, Prediction};
use crate::error::{GpError, Result};
use crate::kernel::KernelSpec;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HodlrSolver {
    #[default]
    Cholesky,
    Smw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HcfgpConfig {
    pub tol: f64,
    pub leaf_size: usize,
    pub max_rank: usize,
    pub solver: HodlrSolver,
}

impl Default for HcfgpConfig {
    fn default() -> Self {
        HcfgpConfig {
            tol: 1e-8,
            leaf_size: 64,
            max_rank: 50,
            solver: HodlrSolver::Cholesky,
        }
    }
}

#[derive(Debug, Clone)]
enum Factor {
    Cholesky(HodlrCholesky),
    Smw(HodlrFactorChain),
}

impl Factor {
    fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Factor::Cholesky(c) => c.solve_matrix(b),
            Factor::Smw(c) => c.solve_matrix(b),
        }
    }

    fn log_det(&self) -> f64 {
        match self {
            Factor::Cholesky(c) => c.log_det(),
            Factor::Smw(c) => c.log_det(),
        }
    }
}

/// Right-hand sides solved per batch when computing predictive variances.
const VARIANCE_BATCH: usize = 256;

/// GP posterior with `K + σ²I` held in HODLR form. Inputs and outputs use
/// the caller's ordering; the partition permutation stays internal.
#[derive(Debug, Clone)]
pub struct HcfgpModel {
    data: Dataset,
    spec: KernelSpec,
    config: HcfgpConfig,
    permutation: PermutationRecord,
    matrix: HodlrMatrix,
    factor: Factor,
    alpha: DVector<f64>,
    log_det: f64,
}

impl HcfgpModel {
    pub fn fit(data: &Dataset, spec: &KernelSpec, config: &HcfgpConfig) -> Result<Self> {
        if data.dim() != spec.dim() {
            return Err(GpError::shape("training input columns", spec.dim(), data.dim()));
        }
        let asm = hodlr_assemble(
            data.x(),
            spec,
            spec.noise_variance(),
            config.tol,
            config.leaf_size,
            config.max_rank,
        )?;
        let factor = match config.solver {
            HodlrSolver::Cholesky => Factor::Cholesky(HodlrCholesky::new(&asm.matrix, config.tol, config.max_rank)?),
            HodlrSolver::Smw => Factor::Smw(HodlrFactorChain::new(&asm.matrix)?),
        };
        let y = asm.permutation.to_permuted(data.y());
        let a = factor.solve_matrix(&DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?;
        let alpha = asm.permutation.to_original(&a.column(0).into_owned());
        let log_det = factor.log_det();
        Ok(HcfgpModel {
            data: data.clone(),
            spec: spec.clone(),
            config: config.clone(),
            permutation: asm.permutation,
            matrix: asm.matrix,
            factor,
            alpha,
            log_det,
        })
    }

    pub fn config(&self) -> &HcfgpConfig {
        &self.config
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn permutation(&self) -> &PermutationRecord {
        &self.permutation
    }

    pub fn matrix(&self) -> &HodlrMatrix {
        &self.matrix
    }

    /// `(K + σ²I)⁻¹ y`, in the caller's ordering.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `(K + σ²I) x = b` with `b` in the caller's ordering.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.data.len() {
            return Err(GpError::shape("HCFGP right-hand side", self.data.len(), b.len()));
        }
        let bp = self.permutation.to_permuted(b);
        let x = self.factor.solve_matrix(&DMatrix::from_column_slice(bp.len(), 1, bp.as_slice()))?;
        Ok(self.permutation.to_original(&x.column(0).into_owned()))
    }

    pub fn nlml(&self) -> f64 {
        let n = self.data.len() as f64;
        0.5 * self.data.y().dot(&self.alpha) + 0.5 * self.log_det + 0.5 * n * (2.0 * PI).ln()
    }

    pub fn predict(&self, xstar: &DMatrix<f64>) -> Result<Prediction> {
        if xstar.ncols() != self.data.dim() {
            return Err(GpError::shape("test input columns", self.data.dim(), xstar.ncols()));
        }
        let k_sx = self.spec.cross(xstar, self.data.x())?;
        let mean = &k_sx * &self.alpha;
        let s2 = self.spec.signal_variance();
        let order = self.permutation.order();
        let n = self.data.len();
        let mut variance = DVector::zeros(xstar.nrows());
        let mut start = 0;
        while start < xstar.nrows() {
            let len = VARIANCE_BATCH.min(xstar.nrows() - start);
            let b = DMatrix::from_fn(n, len, |k, j| k_sx[(start + j, order[k])]);
            let s = self.factor.solve_matrix(&b)?;
            for j in 0..len {
                variance[start + j] = s2 - b.column(j).dot(&s.column(j));
            }
            start += len;
        }
        Ok(Prediction { mean, variance })
    }

    pub fn diagnostics(&self) -> HodlrDiagnostics {
        self.matrix.diagnostics()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HcfgpOutput {
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
    pub nlml: f64,
}

/// One-shot fit, prediction and NLML with the default rank cap and the
/// Cholesky solver.
pub fn hcfgp_fit_predict_nlml(
    data: &Dataset,
    spec: &KernelSpec,
    tol: f64,
    leaf_size: usize,
    xstar: &DMatrix<f64>,
) -> Result<HcfgpOutput> {
    let config = HcfgpConfig {
        tol,
        leaf_size,
        ..HcfgpConfig::default()
    };
    let model = HcfgpModel::fit(data, spec, &config)?;
    let pred = model.predict(xstar)?;
    Ok(HcfgpOutput {
        mean: pred.mean,
        variance: pred.variance,
        nlml: model.nlml(),
    })
}
