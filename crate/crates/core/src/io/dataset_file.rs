//! Packed bit-matrix dataset file.
//!
//! `"QPSD"`, `u64` sample count, `u32` bits per sample (little-endian), then
//! every sample's bits MSB-first, packed 8 per byte, zero-padded at the end.

use std::fs;
use std::path::Path;

use crate::channel::{bits_to_index, PhaseSample, MAX_BITS};

use super::FormatError;

pub const DATASET_MAGIC: &[u8; 4] = b"QPSD";
const HEADER: usize = 16;

pub fn encode_dataset(samples: &[PhaseSample]) -> Result<Vec<u8>, FormatError> {
    let k = samples.first().map(PhaseSample::bits_len).unwrap_or(0);
    if samples.iter().any(|s| s.bits_len() != k) {
        return Err(FormatError::Invalid("samples disagree on bit width".into()));
    }
    let total_bits = samples.len() * k;
    let mut buf = Vec::with_capacity(HEADER + total_bits.div_ceil(8));
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(k as u32).to_le_bytes());
    let mut packed = vec![0u8; total_bits.div_ceil(8)];
    for (i, bit) in samples.iter().flat_map(|s| s.bits.iter()).enumerate() {
        if *bit == 1 {
            packed[i / 8] |= 0x80 >> (i % 8);
        }
    }
    buf.extend_from_slice(&packed);
    Ok(buf)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<PhaseSample>, FormatError> {
    if bytes.len() < HEADER {
        return Err(FormatError::Truncated);
    }
    if &bytes[..4] != DATASET_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let count = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let k = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    if k == 0 || k > MAX_BITS {
        return Err(FormatError::Invalid(format!("bit width {k} out of range")));
    }
    let total_bits = count.checked_mul(k).ok_or(FormatError::Truncated)?;
    let payload = &bytes[HEADER..];
    if payload.len() < total_bits.div_ceil(8) {
        return Err(FormatError::Truncated);
    }
    if payload.len() > total_bits.div_ceil(8) {
        return Err(FormatError::Invalid("trailing bytes after packed bits".into()));
    }
    let bit = |i: usize| (payload[i / 8] >> (7 - i % 8)) & 1;
    (0..count)
        .map(|s| {
            let bits: Vec<u8> = (0..k).map(|b| bit(s * k + b)).collect();
            let index = bits_to_index(&bits).map_err(|e| FormatError::Invalid(e.to_string()))?;
            PhaseSample::from_index(index, k).map_err(|e| FormatError::Invalid(e.to_string()))
        })
        .collect()
}

pub fn save_dataset(samples: &[PhaseSample], path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, encode_dataset(samples)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<PhaseSample>, FormatError> {
    decode_dataset(&fs::read(path)?)
}
