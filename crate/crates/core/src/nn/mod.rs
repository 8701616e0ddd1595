//! Differentiable building blocks with hand-written backward passes.
//!
//! Activations are channels-last: temporal tensors are `[batch, time, channels]`
//! and images `[frames, height, width, channels]`. Every layer keeps its
//! parameters in plain vectors and accumulates gradients into a zeroed copy of
//! itself (see [`Params::zeros_like`]).

pub mod activation;
pub mod batchnorm;
pub mod checkpoint;
pub mod conv1d;
pub mod conv2d;
pub mod gemm;
pub mod gradcheck;
pub mod init;
pub mod linear;
pub mod loss;
pub mod optim;
pub mod params;
pub mod tensor;

pub use activation::relu;
pub use batchnorm::{batchnorm_forward, BatchNorm, Mode};
pub use checkpoint::Checkpoint;
pub use conv1d::{conv1d_forward, Conv1d};
pub use conv2d::Conv2d;
pub use linear::{linear_forward, linear_head, Linear, LinearHead};
pub use loss::{mse_grad, mse_loss};
pub use optim::{lr_schedule, Schedule, Sgd};
pub use params::Params;
pub use tensor::Tensor;
