use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{GpError, Result};

/// `K_1 ⊗ K_2 ⊗ … ⊗ K_D`, with the first factor varying slowest in the
/// flattened index.
#[derive(Debug, Clone, PartialEq)]
pub struct KronOp {
    factors: Vec<DMatrix<f64>>,
}

impl KronOp {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(GpError::InvalidInput("Kronecker product needs at least one factor".into()));
        }
        if let Some(bad) = factors.iter().find(|f| !f.is_square() || f.nrows() == 0) {
            return Err(GpError::InvalidInput(format!(
                "Kronecker factors must be non-empty and square, got {}x{}",
                bad.nrows(),
                bad.ncols()
            )));
        }
        Ok(KronOp { factors })
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn len(&self) -> usize {
        self.factors.iter().map(|f| f.nrows()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies each factor along its tensor mode; `O(N Σ m_d)`.
    pub fn mvm(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        apply_modes(&self.factors, v)
    }

    /// `(⊗ K_d)⁻¹ v = (⊗ K_d⁻¹) v`.
    pub fn inv_apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let inverses = self
            .factors
            .iter()
            .enumerate()
            .map(|(dim, f)| invert_factor(f).ok_or(GpError::SingularFactor { dim }))
            .collect::<Result<Vec<_>>>()?;
        apply_modes(&inverses, v)
    }

    /// Eigenvalues of the product (all pairwise products of factor
    /// eigenvalues). Factors are assumed symmetric.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut out = vec![1.0];
        for f in &self.factors {
            let ev = SymmetricEigen::new(f.clone()).eigenvalues;
            out = out
                .iter()
                .flat_map(|a| ev.iter().map(move |b| a * b))
                .collect();
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = self.factors[0].clone();
        for f in &self.factors[1..] {
            out = out.kronecker(f);
        }
        out
    }
}

fn invert_factor(f: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let lu = f.clone().lu();
    let diag = lu.u().diagonal();
    let max = diag.amax();
    if max == 0.0 || diag.iter().any(|d| d.abs() <= 1e-14 * max) {
        return None;
    }
    lu.try_inverse()
}

fn apply_modes(factors: &[DMatrix<f64>], v: &DVector<f64>) -> Result<DVector<f64>> {
    let total: usize = factors.iter().map(|f| f.nrows()).product();
    if v.len() != total {
        return Err(GpError::shape("Kronecker MVM", total, v.len()));
    }
    let mut x = v.clone();
    let mut stride = total;
    let mut fiber = DVector::zeros(0);
    for f in factors {
        let m = f.nrows();
        stride /= m;
        let block = m * stride;
        fiber.resize_vertically_mut(m, 0.0);
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                for k in 0..m {
                    fiber[k] = x[outer + k * stride + inner];
                }
                let y = f * &fiber;
                for k in 0..m {
                    x[outer + k * stride + inner] = y[k];
                }
            }
        }
    }
    Ok(x)
}
