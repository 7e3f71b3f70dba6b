//! Dense `(channels, length)` tensors and sample-major batches of them.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// A single activation map: `channels` rows of `length` values, row-major.
///
/// Zero-channel tensors are permitted; they act as the identity for
/// channel concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    channels: usize,
    length: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(channels: usize, length: usize, data: Vec<T>) -> Result<Self> {
        if length == 0 {
            return Err(TensorError::Shape("length must be positive".into()));
        }
        if data.len() != channels * length {
            return Err(TensorError::Shape(format!(
                "data has {} values, shape ({channels}, {length}) needs {}",
                data.len(),
                channels * length
            )));
        }
        Ok(Self { channels, length, data })
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Self { channels, length, data: vec![T::zero(); channels * length] }
    }

    /// Builds a tensor from equal-length channel rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let length = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != length) {
            return Err(TensorError::Shape("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), length, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, channel: usize, pos: usize) -> T {
        self.data[channel * self.length + pos]
    }

    pub fn row(&self, channel: usize) -> &[T] {
        &self.data[channel * self.length..(channel + 1) * self.length]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { channels: self.channels, length: self.length, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn sum_squares(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            channels: self.channels,
            length: self.length,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// `n` tensors of identical shape stored contiguously, sample-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    n: usize,
    channels: usize,
    length: usize,
    data: Vec<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(n: usize, channels: usize, length: usize, data: Vec<T>) -> Result<Self> {
        if length == 0 {
            return Err(TensorError::Shape("length must be positive".into()));
        }
        if data.len() != n * channels * length {
            return Err(TensorError::Shape(format!(
                "batch data has {} values, ({n}, {channels}, {length}) needs {}",
                data.len(),
                n * channels * length
            )));
        }
        Ok(Self { n, channels, length, data })
    }

    pub fn zeros(n: usize, channels: usize, length: usize) -> Self {
        Self { n, channels, length, data: vec![T::zero(); n * channels * length] }
    }

    pub fn from_tensors(items: &[Tensor<T>]) -> Result<Self> {
        let first = items.first().ok_or_else(|| TensorError::Shape("empty batch".into()))?;
        let (channels, length) = first.shape();
        let mut data = Vec::with_capacity(items.len() * channels * length);
        for t in items {
            if t.shape() != (channels, length) {
                return Err(TensorError::Shape(format!(
                    "batch members disagree: {:?} vs {:?}",
                    t.shape(),
                    (channels, length)
                )));
            }
            data.extend_from_slice(t.data());
        }
        Ok(Self { n: items.len(), channels, length, data })
    }

    pub fn to_tensors(&self) -> Vec<Tensor<T>> {
        (0..self.n)
            .map(|i| Tensor { channels: self.channels, length: self.length, data: self.sample(i).to_vec() })
            .collect()
    }

    pub fn tensor(&self, i: usize) -> Tensor<T> {
        Tensor { channels: self.channels, length: self.length, data: self.sample(i).to_vec() }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// `(channels, length)` of each member.
    pub fn item_shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    pub fn item_size(&self) -> usize {
        self.channels * self.length
    }

    pub fn sample(&self, i: usize) -> &[T] {
        let s = self.item_size();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [T] {
        let s = self.item_size();
        &mut self.data[i * s..(i + 1) * s]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { n: self.n, channels: self.channels, length: self.length, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Same data, new per-item shape.
    pub fn reshaped(self, channels: usize, length: usize) -> Result<Self> {
        if channels * length != self.item_size() || length == 0 {
            return Err(TensorError::Shape(format!(
                "cannot reshape ({}, {}) into ({channels}, {length})",
                self.channels, self.length
            )));
        }
        Ok(Self { channels, length, ..self })
    }

    /// Rows `[start, end)` of the batch as a new batch.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let s = self.item_size();
        Self { n: end - start, channels: self.channels, length: self.length, data: self.data[start * s..end * s].to_vec() }
    }

    /// Gathers the given sample indices into a new batch.
    pub fn gather(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.item_size());
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        Self { n: indices.len(), channels: self.channels, length: self.length, data }
    }

    pub fn cast<U: Scalar>(&self) -> Batch<U> {
        Batch {
            n: self.n,
            channels: self.channels,
            length: self.length,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T: Scalar> From<Tensor<T>> for Batch<T> {
    fn from(t: Tensor<T>) -> Self {
        Batch { n: 1, channels: t.channels, length: t.length, data: t.data }
    }
}
