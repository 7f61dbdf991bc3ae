use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("dimension {dim} exceeds the dense limit {limit}; use lanczos_lowest instead")]
    TooLarge { dim: usize, limit: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("not converged after {iterations} iterations (worst residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("the requested state vanishes identically")]
    ZeroState,
    #[error("threshold {threshold} not bracketed: {detail}")]
    NotBracketed { threshold: f64, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
