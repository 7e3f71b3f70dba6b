//! Convolutional autoencoder for compressing quantized IRS phase-shift
//! feedback.
//!
//! The receiver quantizes each reflecting element's phase to `K` bits, the
//! encoder maps the bits to a `C`-dimensional code, the code crosses a noisy
//! real-valued feedback channel, and the decoder (optionally fronted by a
//! residual denoising module) reconstructs the bits on the surface side.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the two precisions used in practice.

pub mod channel;
pub mod experiment;
pub mod io;
pub mod model;
pub mod ops;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use scalar::Scalar;
pub use tensor::{Batch, Tensor, TensorError};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Batch32 = Batch<f32>;
pub type Batch64 = Batch<f64>;
pub type ParameterStore32 = model::ParameterStore<f32>;
pub type ParameterStore64 = model::ParameterStore<f64>;
pub type Kernel32 = ops::Kernel<f32>;
pub type Kernel64 = ops::Kernel<f64>;
