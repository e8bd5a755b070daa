use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter vector norm {norm:e} is at or below the origin guard")]
    Origin { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("batch index {index} out of bounds for dataset of size {n}")]
    BatchOutOfBounds { index: usize, n: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("missing snapshot at step {step} in trial {trial}")]
    MissingSnapshot { trial: usize, step: usize },

    #[error("histograms are not comparable: {0}")]
    HistogramMismatch(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
