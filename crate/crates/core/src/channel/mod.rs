//! Phase quantization, datasets, the AWGN feedback channel and the IRS link.

mod awgn;
mod dataset;
mod link;
mod phase;

use thiserror::Error;

use crate::tensor::TensorError;

pub use awgn::{awgn_channel, awgn_tensor, mean_square, ChannelConfig, PowerReference};
pub use dataset::{generate_dataset, to_batch};
pub use link::{optimal_phase, optimal_phases, received_signal, LinkRealization};
pub use phase::{
    bits_to_index, hard_decision, index_to_bits, phase_from_bits, quantize_phase, PhaseSample, MAX_BITS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("phase is not finite")]
    NonFinite,
    #[error("bit value {0} is not 0 or 1")]
    NonBinary(u8),
    #[error("channel coefficient of element {element} is zero; its argument is undefined")]
    ZeroChannel { element: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
