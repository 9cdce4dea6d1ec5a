use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimError { expected: usize, actual: usize },

    #[error("matrix is not positive definite (lambda_min = {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },

    #[error("parse error on line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("cannot partition {rows} rows into {shards} shards")]
    PartitionError { rows: usize, shards: usize },

    #[error("probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("invalid sketch: {0}")]
    InvalidSketch(String),

    #[error("inadmissible stepsize for {method}: {reason}")]
    InadmissibleStepsize { method: String, reason: String },

    #[error("cannot aggregate: {0}")]
    AggregateError(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, actual: usize) -> Self {
        Error::DimError { expected, actual }
    }
}
