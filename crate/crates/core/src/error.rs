use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate field: norm {norm:e} is below 1e-300")]
    DegenerateField { norm: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("empty sampling plan")]
    EmptyPlan,

    #[error("record {index} failed: {source}")]
    RecordFailed {
        index: usize,
        completed: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("dataset format: {0}")]
    Format(String),

    #[error("file size mismatch: header implies {expected} bytes, found {actual}")]
    SizeMismatch { expected: u64, actual: u64 },

    #[error("checksum mismatch in record {index}")]
    Checksum { index: usize },

    #[error("checksum mismatch in header")]
    HeaderChecksum,

    #[error("dataset too small: {0} records")]
    TooSmall(usize),

    #[error(transparent)]
    Io(#[from] io::Error),
}
