use thiserror::Error;

/// Failure modes shared by every module.
///
/// The variants fall into three families that the CLI maps to exit codes:
/// input problems, physics validation failures and solver non-convergence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("coincident positions for atoms {0} and {1}")]
    CoincidentPositions(usize, usize),

    #[error("self-term requested: the Green's tensor is singular at zero separation")]
    SelfTerm,

    #[error("divergent mode: wavevector lies exactly on the light line")]
    DivergentMode,

    #[error("physics validation failed: {0}")]
    Validation(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
