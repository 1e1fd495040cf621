use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Re(A) of a form that must be integrated has an eigenvalue at or below
    /// [`crate::gaussian::PD_TOLERANCE`].
    #[error("real part of the quadratic coefficients is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NonPositiveDefinite { min_eigenvalue: f64 },

    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),

    #[error("measurement outcome has vanishing probability density ({density:.3e})")]
    ZeroProbabilityOutcome { density: f64 },

    #[error("optimizer failed: {0}")]
    OptimizerFailure(String),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
