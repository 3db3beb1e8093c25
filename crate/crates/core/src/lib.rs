//! Gaussian-process regression with interchangeable inference backends.
//!
//! * [`dense`]: exact inference by dense Cholesky, the reference everything
//!   else is measured against.
//! * [`inducing`]: FITC and VFE sparse approximations on `m` inducing points.
//! * [`structured`]: Toeplitz/Kronecker grid operators, linear interpolation
//!   weights and conjugate gradients, combined into structured kernel
//!   interpolation (SKI).
//! * [`hodlr`]: hierarchical off-diagonal low-rank representation of
//!   `K + σ²I`, with a multiplicative Sherman–Morrison–Woodbury factor chain
//!   and a hierarchical Cholesky factorization.
//! * [`trainer`]: hyperparameter learning by minimizing the negative log
//!   marginal likelihood.
//!
//! All backends share [`KernelSpec`] (squared-exponential covariance) and the
//! same NLML convention: `½ yᵀC⁻¹y + ½ log|C| + (n/2) log 2π`.

pub mod data;
pub mod dense;
pub mod error;
pub mod hodlr;
pub mod inducing;
pub mod kernel;
pub mod linalg;
pub mod structured;
pub mod trainer;

pub use data::{Dataset, Prediction};
pub use dense::{exact_fit, exact_nlml, exact_nlml_grad, exact_predict, ExactPosterior, ExactPrediction};
pub use error::{GpError, Result};
pub use hodlr::{HcfgpConfig, HcfgpModel, HodlrSolver};
pub use inducing::{
    fitc_fit, fitc_nlml, optimize_inducing, vfe_elbo, vfe_fit, vfe_predict, InducingObjective,
    InducingSet, SparseMethod, SparsePosterior,
};
pub use kernel::{HyperParams, KernelFamily, KernelSpec};
pub use structured::{SkiConfig, SkiModel};
pub use trainer::{minimize_nlml, OptimizeConfig, Optimized};
