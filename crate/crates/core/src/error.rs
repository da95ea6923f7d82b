use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("invalid qubit targets: {0}")]
    InvalidTargets(String),
    #[error("kraus operators are not trace preserving (max deviation {0:.3e})")]
    IncompleteKraus(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("objective evaluated to a non-finite value")]
    NonFinite,
    #[error("qasm parse error on line {line}: {msg}")]
    Qasm { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
