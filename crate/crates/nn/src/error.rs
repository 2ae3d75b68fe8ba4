use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid network configuration: {0}")]
    Config(String),

    #[error("batch normalization running statistics are uninitialized; run a training-mode pass first")]
    Uninitialized,

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("empty index set: {0}")]
    Empty(&'static str),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("checkpoint checksum mismatch")]
    Checksum,

    #[error("dataset: {0}")]
    Data(#[from] gpstate_core::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}
