//! Shape-only primitives: channel concatenation, residual subtraction and reshape.

use crate::scalar::Scalar;
use crate::tensor::{Batch, Result, Tensor, TensorError};

pub(crate) fn concat_batch<T: Scalar>(a: &Batch<T>, b: &Batch<T>) -> Result<Batch<T>> {
    if a.length() != b.length() || a.len() != b.len() {
        return Err(TensorError::Shape(format!(
            "cannot concatenate ({}, {}, {}) with ({}, {}, {})",
            a.len(),
            a.channels(),
            a.length(),
            b.len(),
            b.channels(),
            b.length()
        )));
    }
    let mut out = Batch::zeros(a.len(), a.channels() + b.channels(), a.length());
    let split = a.item_size();
    for i in 0..a.len() {
        let dst = out.sample_mut(i);
        dst[..split].copy_from_slice(a.sample(i));
        dst[split..].copy_from_slice(b.sample(i));
    }
    Ok(out)
}

/// Splits a concatenated gradient after `first_channels` channels.
pub(crate) fn split_batch<T: Scalar>(g: &Batch<T>, first_channels: usize) -> (Batch<T>, Batch<T>) {
    let len = g.length();
    let rest = g.channels() - first_channels;
    let split = first_channels * len;
    let mut a = Batch::zeros(g.len(), first_channels, len);
    let mut b = Batch::zeros(g.len(), rest, len);
    for i in 0..g.len() {
        let s = g.sample(i);
        a.sample_mut(i).copy_from_slice(&s[..split]);
        b.sample_mut(i).copy_from_slice(&s[split..]);
    }
    (a, b)
}

pub(crate) fn sub_batch<T: Scalar>(input: &Batch<T>, estimate: &Batch<T>) -> Result<Batch<T>> {
    if input.len() != estimate.len() || input.item_shape() != estimate.item_shape() {
        return Err(TensorError::Shape("residual operands differ in shape".into()));
    }
    let mut out = input.clone();
    for (o, &e) in out.data_mut().iter_mut().zip(estimate.data()) {
        *o -= e;
    }
    Ok(out)
}

/// Stacks `b`'s channels after `a`'s.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(concat_batch(&Batch::from(a.clone()), &Batch::from(b.clone()))?.tensor(0))
}

/// Splits `upstream` into the gradients for the two concatenated operands.
pub fn concat_channels_backward<T: Scalar>(a_channels: usize, upstream: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    if a_channels > upstream.channels() {
        return Err(TensorError::Shape("split point beyond channel count".into()));
    }
    let (a, b) = split_batch(&Batch::from(upstream.clone()), a_channels);
    Ok((a.tensor(0), b.tensor(0)))
}

/// `input - estimate`.
pub fn residual_sub<T: Scalar>(input: &Tensor<T>, estimate: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(sub_batch(&Batch::from(input.clone()), &Batch::from(estimate.clone()))?.tensor(0))
}

/// Gradients `(d input, d estimate) = (upstream, -upstream)`.
pub fn residual_sub_backward<T: Scalar>(upstream: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    (upstream.clone(), upstream.map(|v| -v))
}

pub fn reshape<T: Scalar>(x: &Tensor<T>, channels: usize, length: usize) -> Result<Tensor<T>> {
    if channels * length != x.channels() * x.length() {
        return Err(TensorError::Shape(format!(
            "cannot reshape {:?} into ({channels}, {length})",
            x.shape()
        )));
    }
    Tensor::new(channels, length, x.data().to_vec())
}

/// Reshape is a bijection on the flat data, so its gradient is the inverse reshape.
pub fn reshape_backward<T: Scalar>(upstream: &Tensor<T>, original: (usize, usize)) -> Result<Tensor<T>> {
    reshape(upstream, original.0, original.1)
}
