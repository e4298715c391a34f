use thiserror::Error;

/// Errors raised by model construction, density evaluation and sampling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("variable index {index} out of range for q = {q}")]
    IndexOutOfRange { index: usize, q: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("cholesky factorization failed for {what} (size {size}) after jitter retries")]
    Factorization { what: String, size: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    /// True for failures caused by the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Factorization { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
