use thiserror::Error;

use crate::trainer::TraceEntry;

pub type Result<T, E = GpError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum GpError {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Cholesky of `K + σ²I` failed even after adding `jitter` to the diagonal.
    #[error("kernel matrix is ill-conditioned (Cholesky failed with jitter {jitter:e})")]
    IllConditioned { jitter: f64 },

    #[error("inducing set is degenerate: K_ZZ is not positive definite")]
    DegenerateInducingSet,

    #[error("optimization diverged: objective became non-finite ({value})")]
    OptimizationDiverged { value: f64 },

    #[error("optimization failed after {} iterations: no finite point along the search direction", trace.len())]
    OptimizationFailed { trace: Vec<TraceEntry> },

    #[error("input {value} in dimension {dim} lies outside the grid [{lo}, {hi}]")]
    Extrapolation {
        dim: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("Kronecker factor for dimension {dim} is singular")]
    SingularFactor { dim: usize },

    #[error("conjugate gradients broke down at iteration {iteration} (residual {residual})")]
    CgBreakdown { iteration: usize, residual: f64 },

    #[error("matrix is not positive definite: leaf block {block} failed to factorize")]
    Indefinite { block: usize },

    #[error("low-rank update core at level {level} is near-singular")]
    NearSingularUpdate { level: usize },
}

impl GpError {
    pub(crate) fn shape(context: &'static str, expected: usize, found: usize) -> Self {
        GpError::Shape {
            context,
            expected,
            found,
        }
    }
}
