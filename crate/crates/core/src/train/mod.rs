//! Loss, NMSE, learning-rate schedule, Adam, and the training/evaluation loops.

mod adam;
mod loss;
mod schedule;
mod trainer;

use thiserror::Error;

use crate::model::ModelError;
use crate::tensor::TensorError;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{mse_loss, mse_loss_grad, nmse, to_db};
pub use schedule::lr_schedule;
pub use trainer::{evaluate, time_inference, train, Evaluation, MetricsRecord, Timing, TrainConfig, Trainer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("training diverged (non-finite loss) in epoch {epoch} at step {step}")]
    Diverged { epoch: usize, step: u64 },
    #[error("non-finite gradient in layer {layer} at index {index}")]
    NonFiniteGradient { layer: usize, index: usize },
    #[error("ground truth has zero norm; NMSE undefined")]
    ZeroNormTruth,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(ModelError::Tensor(e))
    }
}
