use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

pub(crate) fn relu_slice<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Subgradient 0 at non-positive inputs.
pub(crate) fn relu_backward_slice<T: Scalar>(input: &[T], grad: &mut [T]) {
    for (g, &x) in grad.iter_mut().zip(input) {
        if x <= T::zero() {
            *g = T::zero();
        }
    }
}

#[inline]
fn logistic<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn sigmoid_slice<T: Scalar>(x: &mut [T]) {
    for v in x {
        *v = logistic(*v);
    }
}

/// Uses the forward output: d/dz = y (1 - y).
pub(crate) fn sigmoid_backward_slice<T: Scalar>(output: &[T], grad: &mut [T]) {
    for (g, &y) in grad.iter_mut().zip(output) {
        *g *= y * (T::one() - y);
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    relu_slice(y.data_mut());
    y
}

pub fn relu_backward<T: Scalar>(x: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(x, upstream)?;
    let mut g = upstream.clone();
    relu_backward_slice(x.data(), g.data_mut());
    Ok(g)
}

/// Elementwise `1 / (1 + e^-x)`, evaluated without overflow for large `|x|`.
pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    sigmoid_slice(y.data_mut());
    y
}

pub fn sigmoid_backward<T: Scalar>(x: &Tensor<T>, upstream: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(x, upstream)?;
    let y = sigmoid(x);
    let mut g = upstream.clone();
    sigmoid_backward_slice(y.data(), g.data_mut());
    Ok(g)
}

fn same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}
