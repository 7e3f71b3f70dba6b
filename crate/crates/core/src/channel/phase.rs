use std::f64::consts::TAU;

use crate::scalar::Scalar;

use super::ChannelError;

/// Largest supported bit width per phase.
pub const MAX_BITS: usize = 32;

/// One reflecting element's quantized phase in all three representations.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSample {
    /// Grid index in `[0, 2^K)`.
    pub index: u64,
    /// `K` bits, most significant first.
    pub bits: Vec<u8>,
    /// `index * 2π / 2^K`.
    pub radians: f64,
}

impl PhaseSample {
    pub fn from_index(index: u64, k: usize) -> Result<Self, ChannelError> {
        check_bits(k)?;
        if index >= levels(k) {
            return Err(ChannelError::Config(format!("index {index} out of range for K = {k}")));
        }
        Ok(Self { index, bits: index_to_bits(index, k), radians: grid_radians(index, k) })
    }

    pub fn bits_len(&self) -> usize {
        self.bits.len()
    }
}

fn check_bits(k: usize) -> Result<(), ChannelError> {
    if k == 0 || k > MAX_BITS {
        return Err(ChannelError::Config(format!("bits per phase must be in 1..={MAX_BITS}, got {k}")));
    }
    Ok(())
}

fn levels(k: usize) -> u64 {
    1u64 << k
}

fn grid_step(k: usize) -> f64 {
    TAU / levels(k) as f64
}

fn grid_radians(index: u64, k: usize) -> f64 {
    index as f64 * grid_step(k)
}

/// MSB-first binary expansion of `index` on `k` bits.
pub fn index_to_bits(index: u64, k: usize) -> Vec<u8> {
    (0..k).rev().map(|b| ((index >> b) & 1) as u8).collect()
}

pub fn bits_to_index(bits: &[u8]) -> Result<u64, ChannelError> {
    check_bits(bits.len())?;
    bits.iter().try_fold(0u64, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b as u64),
        other => Err(ChannelError::NonBinary(other)),
    })
}

/// Snaps `theta` to the nearest of the `2^K` uniform grid points
/// `{0, 2π/2^K, ..., (2^K - 1) 2π/2^K}`. Halfway cases round up, and the
/// top grid point wraps to index 0.
pub fn quantize_phase(theta: f64, k: usize) -> Result<PhaseSample, ChannelError> {
    check_bits(k)?;
    if !theta.is_finite() {
        return Err(ChannelError::NonFinite);
    }
    let wrapped = theta.rem_euclid(TAU);
    let index = ((wrapped / grid_step(k) + 0.5).floor() as u64) % levels(k);
    PhaseSample::from_index(index, k)
}

/// Radian value encoded by an MSB-first bit vector.
pub fn phase_from_bits(bits: &[u8]) -> Result<f64, ChannelError> {
    let index = bits_to_index(bits)?;
    Ok(grid_radians(index, bits.len()))
}

/// Thresholds soft outputs at 0.5 (values at exactly 0.5 decide 1).
pub fn hard_decision<T: Scalar>(soft: &[T]) -> Vec<u8> {
    let half = T::lit(0.5);
    soft.iter().map(|&v| u8::from(v >= half)).collect()
}
