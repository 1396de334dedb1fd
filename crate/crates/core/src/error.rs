use thiserror::Error;

/// Errors raised by the simulation and filtering routines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance factorization failed: {0}")]
    Factorization(String),
    #[error("non-finite weight at index {index}")]
    NonFiniteWeight { index: usize },
    #[error(
        "filter degeneracy at step {step}: every weight vanished for y = {count} \
         (intensity range [{lambda_min:.6e}, {lambda_max:.6e}])"
    )]
    Degeneracy {
        step: usize,
        count: u64,
        lambda_min: f64,
        lambda_max: f64,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::Domain(message.into()))
}
