//! Forward and backward passes for every primitive the network uses.
//!
//! The public functions operate on single [`Tensor`]s (or slices of them for
//! batch normalization). The network executor calls the batched `pub(crate)`
//! kernels underneath them directly.

mod activation;
mod conv;
mod norm;
mod structural;

use crate::tensor::Tensor;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward};
pub use conv::{conv1d, conv1d_backward, Kernel};
pub use norm::{batch_norm, batch_norm_backward, RunningStats, DEFAULT_EPS, RUNNING_MOMENTUM};
pub use structural::{
    concat_channels, concat_channels_backward, reshape, reshape_backward, residual_sub, residual_sub_backward,
};

pub(crate) use activation::{relu_backward_slice, relu_slice, sigmoid_backward_slice, sigmoid_slice};
pub(crate) use conv::{conv_backward_batch, conv_forward_batch, ConvCache};
pub(crate) use norm::{norm_backward, norm_forward_eval, norm_forward_train, NormCache};
pub(crate) use structural::{concat_batch, split_batch, sub_batch};

/// Gradients of a primitive with respect to its input and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveGradient<T> {
    pub input_grad: Tensor<T>,
    /// One tensor per parameter, in declaration order.
    pub param_grads: Vec<Tensor<T>>,
}
