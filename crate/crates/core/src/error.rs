use thiserror::Error;

/// Errors raised by the saddle-search library.
#[derive(Debug, Error)]
pub enum IpmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("eigensolver did not converge (last residual {residual:e})")]
    EigSolverFailure { residual: f64 },

    #[error("degenerate spectrum: eigenvalue gap {gap:e} is below tolerance {tol:e}")]
    DegenerateSpectrum { gap: f64, tol: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("vector must have zero mean, got mean {0:e}")]
    NonZeroMean(f64),

    #[error("dense Hessian is not available for this surface")]
    DenseHessianUnavailable,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IpmError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(IpmError::DimensionMismatch { expected, got })
    }
}
