use thiserror::Error;

use crate::groundstate::GroundState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field has {actual} samples, grid expects {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("field contains non-finite samples")]
    NonFinite,

    /// The `ξ₁ = 0` column is not negligible, so the field is not an x-derivative.
    #[error("field is not an x-derivative: zero-x-mean column has relative size {magnitude:.3e} (tolerance {tolerance:.1e})")]
    NotAdmissible { magnitude: f64, tolerance: f64 },

    #[error("ray never crosses Nehari manifold: {0}")]
    NoNehariCrossing(String),

    #[error("bad seed: {0}")]
    BadSeed(String),

    #[error("iteration diverged at step {iteration} (residual {residual:.3e})")]
    Diverged { iteration: usize, residual: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        state: Box<GroundState>,
    },

    #[error("line search failed after {0} halvings")]
    LineSearch(usize),

    #[error("field is identically zero")]
    ZeroField,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
