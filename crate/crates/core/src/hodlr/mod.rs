//! Hierarchical off-diagonal low-rank (HODLR) representation of `K + σ²I`:
//! k-d partition, ACA compression, SMW factor chain, hierarchical Cholesky,
//! and the GP backend built on them.

mod aca;
mod chain;
mod cholesky;
mod gp;
mod matrix;
mod partition;

pub use aca::{aca_compress, LowRank};
pub use chain::{hodlr_factorize, hodlr_logdet, hodlr_solve, HodlrFactorChain};
pub use cholesky::{hodlr_cholesky, HodlrCholesky};
pub use gp::{hcfgp_fit_predict_nlml, HcfgpConfig, HcfgpModel, HcfgpOutput, HodlrSolver};
pub use matrix::{
    hodlr_assemble, hodlr_mvm, HodlrAssembly, HodlrBlock, HodlrDiagnostics, HodlrMatrix, LevelStats,
};
pub use partition::{partition_points, ClusterNode, ClusterTree, PermutationRecord};
