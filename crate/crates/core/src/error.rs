use thiserror::Error;

pub type Result<T> = std::result::Result<T, ArchError>;

#[derive(Debug, Error)]
pub enum ArchError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A moment or design matrix is singular or too badly conditioned to invert.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// The optimizer stopped before meeting its tolerances.
    #[error("optimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    /// A conditional variance fell below the positivity floor.
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ArchError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        ArchError::Domain(msg.into())
    }

    pub(crate) fn singular(msg: impl Into<String>) -> Self {
        ArchError::Singular(msg.into())
    }
}
