use crate::scalar::Scalar;
use crate::tensor::{Batch, TensorError};

use super::TrainError;

fn same_shape<T: Scalar>(a: &Batch<T>, b: &Batch<T>) -> Result<(), TrainError> {
    if a.len() != b.len() || a.item_shape() != b.item_shape() {
        return Err(TensorError::Shape(format!(
            "({}, {:?}) vs ({}, {:?})",
            a.len(),
            a.item_shape(),
            b.len(),
            b.item_shape()
        ))
        .into());
    }
    if a.is_empty() {
        return Err(TensorError::Shape("empty batch".into()).into());
    }
    Ok(())
}

/// `(1/M) Σ_m ||recon_m - truth_m||²` over the `M` samples of the batch.
pub fn mse_loss<T: Scalar>(reconstruction: &Batch<T>, truth: &Batch<T>) -> Result<T, TrainError> {
    same_shape(reconstruction, truth)?;
    let sum: T = reconstruction.data().iter().zip(truth.data()).map(|(&r, &t)| (r - t) * (r - t)).sum();
    Ok(sum / T::lit(truth.len() as f64))
}

/// Gradient of [`mse_loss`]: `2 (recon - truth) / M`.
pub fn mse_loss_grad<T: Scalar>(reconstruction: &Batch<T>, truth: &Batch<T>) -> Result<Batch<T>, TrainError> {
    same_shape(reconstruction, truth)?;
    let scale = T::lit(2.0 / truth.len() as f64);
    let data = reconstruction.data().iter().zip(truth.data()).map(|(&r, &t)| scale * (r - t)).collect();
    Ok(Batch::new(truth.len(), truth.channels(), truth.length(), data)?)
}

/// `||truth - recon||² / ||truth||²`, accumulated in `f64`.
pub fn nmse<T: Scalar>(reconstruction: &Batch<T>, truth: &Batch<T>) -> Result<f64, TrainError> {
    same_shape(reconstruction, truth)?;
    nmse_slices(reconstruction.data(), truth.data())
}

fn nmse_slices<T: Scalar>(reconstruction: &[T], truth: &[T]) -> Result<f64, TrainError> {
    let (mut err, mut norm) = (0.0f64, 0.0f64);
    for (&r, &t) in reconstruction.iter().zip(truth) {
        let (r, t) = (r.as_f64(), t.as_f64());
        err += (t - r) * (t - r);
        norm += t * t;
    }
    if norm == 0.0 {
        return Err(TrainError::ZeroNormTruth);
    }
    Ok(err / norm)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
