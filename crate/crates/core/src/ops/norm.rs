//! Batch normalization without a learned affine term.
//!
//! Statistics are per channel over every sample and position of the batch,
//! with the biased (`1/m`) variance.

use crate::scalar::Scalar;
use crate::tensor::{Batch, Result, Tensor, TensorError};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Momentum applied to the running statistics: `running = m * running + (1 - m) * batch`.
pub const RUNNING_MOMENTUM: f64 = 0.9;

/// Running per-channel statistics used at inference time.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Scalar> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self { mean: vec![T::zero(); channels], var: vec![T::one(); channels] }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// `running = m * running + (1 - m) * batch`.
    pub fn update(&mut self, mean: &[T], var: &[T]) {
        let m = T::lit(RUNNING_MOMENTUM);
        for ch in 0..self.mean.len() {
            self.mean[ch] = m * self.mean[ch] + (T::one() - m) * mean[ch];
            self.var[ch] = m * self.var[ch] + (T::one() - m) * var[ch];
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NormCache<T> {
    normalized: Batch<T>,
    inv_std: Vec<T>,
    training: bool,
    /// Batch `(mean, variance)` in training mode.
    pub(crate) moments: Option<(Vec<T>, Vec<T>)>,
}

/// Per-channel `(mean, biased variance)` over samples and positions.
fn channel_moments<T: Scalar>(x: &Batch<T>) -> (Vec<T>, Vec<T>) {
    let (n, c, len) = (x.len(), x.channels(), x.length());
    let count = T::lit((n * len) as f64);
    let mut mean = vec![T::zero(); c];
    for b in 0..n {
        let s = x.sample(b);
        for ch in 0..c {
            mean[ch] += s[ch * len..(ch + 1) * len].iter().copied().sum::<T>();
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    let mut var = vec![T::zero(); c];
    for b in 0..n {
        let s = x.sample(b);
        for ch in 0..c {
            var[ch] += s[ch * len..(ch + 1) * len].iter().map(|&v| (v - mean[ch]) * (v - mean[ch])).sum::<T>();
        }
    }
    for v in &mut var {
        *v /= count;
    }
    (mean, var)
}

fn apply<T: Scalar>(x: &Batch<T>, mean: &[T], inv_std: &[T]) -> Batch<T> {
    let len = x.length();
    let mut y = x.clone();
    for b in 0..y.len() {
        let s = y.sample_mut(b);
        for (ch, (&m, &k)) in mean.iter().zip(inv_std).enumerate() {
            for v in &mut s[ch * len..(ch + 1) * len] {
                *v = (*v - m) * k;
            }
        }
    }
    y
}

/// Training-mode normalization with batch statistics; updates `running` when given.
pub(crate) fn norm_forward_train<T: Scalar>(
    x: &Batch<T>,
    eps: T,
    running: Option<&mut RunningStats<T>>,
) -> Result<(Batch<T>, NormCache<T>)> {
    if x.len() < 2 {
        return Err(TensorError::Config(format!(
            "batch normalization needs at least 2 samples in training mode, got {}",
            x.len()
        )));
    }
    let (mean, var) = channel_moments(x);
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    if let Some(r) = running {
        r.update(&mean, &var);
    }
    let y = apply(x, &mean, &inv_std);
    Ok((y.clone(), NormCache { normalized: y, inv_std, training: true, moments: Some((mean, var)) }))
}

pub(crate) fn norm_forward_eval<T: Scalar>(x: &Batch<T>, eps: T, running: &RunningStats<T>) -> (Batch<T>, NormCache<T>) {
    let inv_std: Vec<T> = running.var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let y = apply(x, &running.mean, &inv_std);
    (y.clone(), NormCache { normalized: y, inv_std, training: false, moments: None })
}

pub(crate) fn norm_backward<T: Scalar>(cache: &NormCache<T>, upstream: &Batch<T>) -> Batch<T> {
    let y = &cache.normalized;
    let (n, c, len) = (y.len(), y.channels(), y.length());
    let mut dx = upstream.clone();
    if !cache.training {
        for b in 0..n {
            let s = dx.sample_mut(b);
            for ch in 0..c {
                for v in &mut s[ch * len..(ch + 1) * len] {
                    *v *= cache.inv_std[ch];
                }
            }
        }
        return dx;
    }
    // dx = inv_std * (dy - mean(dy) - y * mean(dy * y))
    let count = T::lit((n * len) as f64);
    let mut mean_dy = vec![T::zero(); c];
    let mut mean_dy_y = vec![T::zero(); c];
    for b in 0..n {
        let (g, yy) = (upstream.sample(b), y.sample(b));
        for ch in 0..c {
            for t in ch * len..(ch + 1) * len {
                mean_dy[ch] += g[t];
                mean_dy_y[ch] += g[t] * yy[t];
            }
        }
    }
    for ch in 0..c {
        mean_dy[ch] /= count;
        mean_dy_y[ch] /= count;
    }
    for b in 0..n {
        let yy = y.sample(b).to_vec();
        let s = dx.sample_mut(b);
        for ch in 0..c {
            for t in ch * len..(ch + 1) * len {
                s[t] = cache.inv_std[ch] * (s[t] - mean_dy[ch] - yy[t] * mean_dy_y[ch]);
            }
        }
    }
    dx
}

/// Normalizes a mini-batch with its own statistics:
/// `z_norm = (z - mean) / sqrt(var + eps)` per channel.
pub fn batch_norm<T: Scalar>(batch: &[Tensor<T>], eps: T) -> Result<Vec<Tensor<T>>> {
    if batch.is_empty() {
        return Err(TensorError::Config("empty batch".into()));
    }
    let x = Batch::from_tensors(batch)?;
    let (y, _) = norm_forward_train(&x, eps, None)?;
    Ok(y.to_tensors())
}

/// Input gradient of `sum(upstream * batch_norm(batch))`.
pub fn batch_norm_backward<T: Scalar>(batch: &[Tensor<T>], eps: T, upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
    let x = Batch::from_tensors(batch)?;
    let up = Batch::from_tensors(upstream)?;
    if up.len() != x.len() || up.item_shape() != x.item_shape() {
        return Err(TensorError::Shape("upstream batch does not match input batch".into()));
    }
    let (_, cache) = norm_forward_train(&x, eps, None)?;
    Ok(norm_backward(&cache, &up).to_tensors())
}
