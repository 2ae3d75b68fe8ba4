//! Differentiable layers. Each layer has a training-mode `forward` that caches
//! what its `backward` needs, and an `infer` path that takes `&self`.
//! Backward passes accumulate into parameter gradients.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod loss;

pub use activation::{leaky_relu, residual_add, sigmoid, LeakyRelu, Sigmoid};
pub use batchnorm::BatchNorm;
pub use conv::Conv;
pub use dense::Dense;
pub use loss::{integral_mse, integral_mse_loss};
