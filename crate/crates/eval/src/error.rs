use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("solver: {0}")]
    Core(#[from] gpstate_core::Error),

    #[error("network: {0}")]
    Net(#[from] gpstate_nn::Error),

    #[error("reference energy is zero")]
    ZeroReference,

    #[error("prediction: {0}")]
    Prediction(String),

    #[error("report: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
