use thiserror::Error;
use trace_core::TraceError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] TraceError),
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

pub(crate) fn spec_error(msg: impl Into<String>) -> BenchError {
    BenchError::Spec(msg.into())
}
