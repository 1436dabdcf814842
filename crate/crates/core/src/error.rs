use thiserror::Error;

/// Errors raised by the exponential-family machinery and the optimizers built on it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameters outside the valid domain: {0}")]
    Domain(String),

    #[error("family mismatch: {left} vs {right}")]
    FamilyMismatch { left: String, right: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("Fisher matrix is not positive-definite")]
    SingularFisher,

    #[error("loss model does not provide the Hessian required by this estimator")]
    MissingHessian,

    #[error("loss model has no closed-form Gaussian expectations")]
    NoExactExpectation,

    #[error("iterate left the valid domain at iteration {iteration}: {reason}")]
    LeftDomain { iteration: usize, reason: String },

    #[error("inner solver failed: {0}")]
    SolverFailure(String),

    #[error("Hessian is not positive-definite")]
    NonPdHessian,

    #[error("linear system is singular")]
    SingularSystem,

    #[error("base measure must be h(theta) = 1 for family {0}")]
    UnsupportedBaseMeasure(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
