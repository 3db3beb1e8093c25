//! Grid-structured operators and the SKI backend built from them.

mod cg;
mod interp;
mod kron;
mod ski;
mod toeplitz;

pub use cg::{cg_solve, CgResult, FnOperator, LinearOperator};
pub use interp::{ski_weights, InterpWeights, RegularGrid};
pub use kron::KronOp;
pub use ski::{ski_apply, ski_nlml_approx, ski_predict, GridKernel, SkiConfig, SkiModel, SkiOperator};
pub use toeplitz::ToeplitzOp;

use nalgebra::DVector;

use crate::error::Result;

pub fn toeplitz_mvm(op: &ToeplitzOp, v: &DVector<f64>) -> Result<DVector<f64>> {
    op.mvm(v)
}

pub fn kron_mvm(op: &KronOp, v: &DVector<f64>) -> Result<DVector<f64>> {
    op.mvm(v)
}

pub fn kron_inv_apply(op: &KronOp, v: &DVector<f64>) -> Result<DVector<f64>> {
    op.inv_apply(v)
}
