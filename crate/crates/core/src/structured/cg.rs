use nalgebra::{DMatrix, DVector};

use crate::error::{GpError, Result};

/// Square linear map applied by matrix-vector products only.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }
}

/// Adapter turning a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        (self.f)(v)
    }
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// Relative residual `‖A x − b‖ / ‖b‖` of the returned iterate.
    pub residual: f64,
}

/// Conjugate gradients from a zero initial guess. The operator must be
/// symmetric positive definite.
pub fn cg_solve<A: LinearOperator + ?Sized>(
    op: &A,
    b: &DVector<f64>,
    tol: f64,
    maxit: usize,
) -> Result<CgResult> {
    let n = op.dim();
    if b.len() != n {
        return Err(GpError::shape("CG right-hand side", n, b.len()));
    }
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok(CgResult {
            x: DVector::zeros(n),
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    let mut iterations = 0;
    while iterations < maxit && rr.sqrt() > tol * bnorm {
        let ap = op.apply(&p);
        let pap = p.dot(&ap);
        iterations += 1;
        if !pap.is_finite() || pap <= 0.0 {
            return Err(GpError::CgBreakdown {
                iteration: iterations,
                residual: rr.sqrt() / bnorm,
            });
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rr_new = r.norm_squared();
        if !rr_new.is_finite() {
            return Err(GpError::CgBreakdown {
                iteration: iterations,
                residual: rr_new,
            });
        }
        p *= rr_new / rr;
        p += &r;
        rr = rr_new;
    }
    let residual = (op.apply(&x) - b).norm() / bnorm;
    Ok(CgResult {
        x,
        iterations,
        residual,
    })
}
