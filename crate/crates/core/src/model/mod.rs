//! PSCDN encoder/decoder construction, parameters and execution.

mod network;
mod params;
mod spec;

use thiserror::Error;

use crate::tensor::TensorError;

pub use network::{decode, denoise_estimate, encode, forward, forward_tensor, Mode, Pass};
pub use params::{init_parameters, LayerParams, ParameterStore};
pub use spec::{
    build_decoder, build_encoder, build_pscn_variant, Activation, ConvSpec, LayerKind, LayerSpec, NetworkSpec, Variant,
    DEFAULT_BITS, DEFAULT_FILTERS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parameter error: {0}")]
    Params(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
