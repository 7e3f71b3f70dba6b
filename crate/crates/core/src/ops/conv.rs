//! One-dimensional convolution with "same" zero padding.
//!
//! The batched kernel lowers the convolution to a single matrix product by
//! unfolding every sample into columns (im2col). Taps that can never overlap
//! the signal (offset >= length, e.g. the side taps of a width-3 kernel on a
//! length-1 map) are dropped from the unfolded matrix.

use crate::scalar::Scalar;
use crate::tensor::{Batch, Result, Tensor, TensorError};

use super::PrimitiveGradient;

/// Convolution weights laid out `[out][in][tap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    out_channels: usize,
    in_channels: usize,
    kernel_size: usize,
    data: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(out_channels: usize, in_channels: usize, kernel_size: usize, data: Vec<T>) -> Result<Self> {
        if kernel_size % 2 == 0 {
            return Err(TensorError::Config(format!("kernel size {kernel_size} must be odd")));
        }
        if out_channels == 0 || in_channels == 0 {
            return Err(TensorError::Config("kernel channel counts must be positive".into()));
        }
        if data.len() != out_channels * in_channels * kernel_size {
            return Err(TensorError::Shape(format!(
                "kernel data has {} values, ({out_channels}, {in_channels}, {kernel_size}) needs {}",
                data.len(),
                out_channels * in_channels * kernel_size
            )));
        }
        Ok(Self { out_channels, in_channels, kernel_size, data })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel_size: usize) -> Result<Self> {
        Self::new(out_channels, in_channels, kernel_size, vec![T::zero(); out_channels * in_channels * kernel_size])
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, o: usize, i: usize, k: usize) -> T {
        self.data[(o * self.in_channels + i) * self.kernel_size + k]
    }

    /// Number of scalar weights, bias excluded.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flattened `(out, in * kernel)` view as a tensor, the shape used for
    /// weight gradients.
    pub fn to_tensor(&self) -> Tensor<T> {
        Tensor::new(self.out_channels, self.in_channels * self.kernel_size, self.data.clone())
            .expect("kernel dims are consistent")
    }

    fn half(&self) -> usize {
        (self.kernel_size - 1) / 2
    }

    /// Taps whose offset can reach a valid position for a signal of `length`.
    fn active_taps(&self, length: usize) -> Vec<usize> {
        let p = self.half();
        (0..self.kernel_size).filter(|&k| k.abs_diff(p) < length).collect()
    }

    /// `(out, in * active)` matrix restricted to the active taps.
    fn active_matrix(&self, taps: &[usize]) -> Vec<T> {
        if taps.len() == self.kernel_size {
            return self.data.clone();
        }
        let mut m = Vec::with_capacity(self.out_channels * self.in_channels * taps.len());
        for o in 0..self.out_channels {
            for i in 0..self.in_channels {
                for &k in taps {
                    m.push(self.get(o, i, k));
                }
            }
        }
        m
    }
}

/// Saved state of a batched forward convolution.
#[derive(Debug, Clone)]
pub(crate) struct ConvCache<T> {
    taps: Vec<usize>,
    /// Unfolded input, `(in * taps, n * length)` row-major.
    cols: Vec<T>,
    n: usize,
    length: usize,
}

fn unfold<T: Scalar>(x: &Batch<T>, half: usize, taps: &[usize]) -> Vec<T> {
    let (n, cin, len) = (x.len(), x.channels(), x.length());
    let width = n * len;
    let rows = cin * taps.len();
    let mut cols = vec![T::zero(); rows * width];
    for b in 0..n {
        let sample = x.sample(b);
        for i in 0..cin {
            let src = &sample[i * len..(i + 1) * len];
            for (a, &k) in taps.iter().enumerate() {
                let row = &mut cols[(i * taps.len() + a) * width + b * len..][..len];
                // row[t] = src[t + k - half]
                if k >= half {
                    let s = k - half;
                    row[..len - s].copy_from_slice(&src[s..]);
                } else {
                    let s = half - k;
                    row[s..].copy_from_slice(&src[..len - s]);
                }
            }
        }
    }
    cols
}

pub(crate) fn conv_forward_batch<T: Scalar>(
    x: &Batch<T>,
    kernel: &Kernel<T>,
    bias: &[T],
) -> Result<(Batch<T>, ConvCache<T>)> {
    if x.channels() != kernel.in_channels {
        return Err(TensorError::Shape(format!(
            "conv1d expects {} input channels, got {}",
            kernel.in_channels,
            x.channels()
        )));
    }
    if bias.len() != kernel.out_channels {
        return Err(TensorError::Shape(format!(
            "bias has {} entries for {} output channels",
            bias.len(),
            kernel.out_channels
        )));
    }
    let (n, len) = (x.len(), x.length());
    let taps = kernel.active_taps(len);
    let cols = unfold(x, kernel.half(), &taps);
    let w = kernel.active_matrix(&taps);
    let inner = kernel.in_channels * taps.len();
    let width = n * len;
    let cout = kernel.out_channels;

    // mat = W_active (cout x inner) . cols (inner x width)
    let mut mat = vec![T::zero(); cout * width];
    T::gemm(cout, inner, width, T::one(), &w, (inner, 1), &cols, (width, 1), T::zero(), &mut mat, (width, 1));

    let mut out = Batch::zeros(n, cout, len);
    for b in 0..n {
        let dst = out.sample_mut(b);
        for o in 0..cout {
            let src = &mat[o * width + b * len..][..len];
            for (d, &s) in dst[o * len..(o + 1) * len].iter_mut().zip(src) {
                *d = s + bias[o];
            }
        }
    }
    Ok((out, ConvCache { taps, cols, n, length: len }))
}

/// Returns `(input_grad, weight_grad, bias_grad)`; weight grad uses the
/// kernel's `[out][in][tap]` layout with zeros at inactive taps.
pub(crate) fn conv_backward_batch<T: Scalar>(
    cache: &ConvCache<T>,
    kernel: &Kernel<T>,
    upstream: &Batch<T>,
) -> (Batch<T>, Vec<T>, Vec<T>) {
    let (n, len) = (cache.n, cache.length);
    let cout = kernel.out_channels;
    let cin = kernel.in_channels;
    let taps = &cache.taps;
    let inner = cin * taps.len();
    let width = n * len;
    debug_assert_eq!(upstream.item_shape(), (cout, len));

    // Gather upstream into (cout, width).
    let mut dmat = vec![T::zero(); cout * width];
    let mut db = vec![T::zero(); cout];
    for b in 0..n {
        let src = upstream.sample(b);
        for o in 0..cout {
            let row = &src[o * len..(o + 1) * len];
            dmat[o * width + b * len..][..len].copy_from_slice(row);
            db[o] += row.iter().copied().sum::<T>();
        }
    }

    // dW_active (cout x inner) = dmat . cols^T
    let mut dw_active = vec![T::zero(); cout * inner];
    T::gemm(cout, width, inner, T::one(), &dmat, (width, 1), &cache.cols, (1, width), T::zero(), &mut dw_active, (inner, 1));
    let dw = if taps.len() == kernel.kernel_size {
        dw_active
    } else {
        let mut full = vec![T::zero(); kernel.data.len()];
        for o in 0..cout {
            for i in 0..cin {
                for (a, &k) in taps.iter().enumerate() {
                    full[(o * cin + i) * kernel.kernel_size + k] = dw_active[o * inner + i * taps.len() + a];
                }
            }
        }
        full
    };

    // dcols (inner x width) = W_active^T . dmat
    let w = kernel.active_matrix(taps);
    let mut dcols = vec![T::zero(); inner * width];
    T::gemm(inner, cout, width, T::one(), &w, (1, inner), &dmat, (width, 1), T::zero(), &mut dcols, (width, 1));

    // Fold columns back onto the input positions.
    let half = kernel.half();
    let mut dx = Batch::zeros(n, cin, len);
    for b in 0..n {
        let dst = dx.sample_mut(b);
        for i in 0..cin {
            let drow = &mut dst[i * len..(i + 1) * len];
            for (a, &k) in taps.iter().enumerate() {
                let src = &dcols[(i * taps.len() + a) * width + b * len..][..len];
                if k >= half {
                    let s = k - half;
                    for (d, &g) in drow[s..].iter_mut().zip(&src[..len - s]) {
                        *d += g;
                    }
                } else {
                    let s = half - k;
                    for (d, &g) in drow[..len - s].iter_mut().zip(&src[s..]) {
                        *d += g;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Convolves one tensor: `out[o][t] = bias[o] + sum_{i,k} w[o][i][k] * x[i][t + k - (ks-1)/2]`,
/// zero outside `[0, length)`.
pub fn conv1d<T: Scalar>(x: &Tensor<T>, kernel: &Kernel<T>, bias: &[T]) -> Result<Tensor<T>> {
    let (out, _) = conv_forward_batch(&Batch::from(x.clone()), kernel, bias)?;
    Ok(out.tensor(0))
}

/// Gradients of `sum(upstream * conv1d(x))` with respect to the input, the
/// weights (as an `(out, in * kernel)` tensor) and the bias (`(out, 1)`).
pub fn conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    kernel: &Kernel<T>,
    upstream: &Tensor<T>,
) -> Result<PrimitiveGradient<T>> {
    let zeros = vec![T::zero(); kernel.out_channels];
    let (_, cache) = conv_forward_batch(&Batch::from(x.clone()), kernel, &zeros)?;
    if upstream.shape() != (kernel.out_channels, x.length()) {
        return Err(TensorError::Shape(format!(
            "upstream {:?} does not match conv output {:?}",
            upstream.shape(),
            (kernel.out_channels, x.length())
        )));
    }
    let (dx, dw, db) = conv_backward_batch(&cache, kernel, &Batch::from(upstream.clone()));
    Ok(PrimitiveGradient {
        input_grad: dx.tensor(0),
        param_grads: vec![
            Tensor::new(kernel.out_channels, kernel.in_channels * kernel.kernel_size, dw)?,
            Tensor::new(kernel.out_channels, 1, db)?,
        ],
    })
}
