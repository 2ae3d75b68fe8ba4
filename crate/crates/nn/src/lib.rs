//! Surrogate network for condensate ground states: tensors, layers with
//! hand-written backward passes, the residual dilated-convolution model,
//! checkpoints, Adam, and the training loop.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod trainer;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use error::{Error, Result};
pub use model::{GroundStateNet, LayerKind, LayerSpec, NetConfig};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use tensor::{Param, Tensor};
pub use trainer::{evaluate_loss, train, EpochStats, Samples, StepDecay, TrainConfig, TrainReport};
