use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller broke a documented precondition (wrong history length,
    /// lag beyond the series length, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Model parameters do not describe a valid MTD-AR(p) process.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The requested computation is only defined for a zero binding mean
    /// direction (or some other restricted configuration).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A linear solve, eigenvalue computation or similar failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// The optimizer did not reach a stationary point. `best` holds the
    /// best point found, when any start produced a finite likelihood.
    #[error("optimizer failed to converge for signs {signs:?} (best log-likelihood {best_loglik})")]
    Optimization {
        signs: Vec<i8>,
        best_loglik: f64,
        best: Option<Box<crate::inference::FitResult>>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
