use thiserror::Error;

use crate::linalg::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("linear solve failed: {reason} (iterations {}, relative residual {:.3e})", .report.iterations, .report.rel_residual)]
    SolverFailure { reason: String, report: SolveReport },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {last_update:.3e})")]
    NonConvergence { iterations: usize, last_update: f64 },

    #[error("convergence order undefined: {0}")]
    UndefinedOrder(String),

    #[error("meshes are not nested: {0}")]
    NotNested(String),
}
