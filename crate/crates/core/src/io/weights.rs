//! Binary weights file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "PSCD"            magic
//! u16               format version
//! u32 u32 u32       K, C, N
//! u8                variant tag
//! u32               layer count
//! per layer:
//!   u32             layer id
//!   u32 u32 u32     out channels, in channels, kernel size
//!   u8              1 if running batch-norm statistics follow
//!   f32 * out*in*k  weights, [out][in][tap]
//!   f32 * out       bias
//!   f32 * out * 2   running mean, running variance (when flagged)
//! u32               CRC-32 of every byte after the version field
//! ```

use std::fs;
use std::path::Path;

use crate::model::{LayerParams, NetworkSpec, ParameterStore, Variant};
use crate::ops::{Kernel, RunningStats};
use crate::scalar::Scalar;

use super::FormatError;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"PSCD";
pub const WEIGHTS_VERSION: u16 = 1;

const PREFIX: usize = 6;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f32s<T: Scalar>(buf: &mut Vec<u8>, values: &[T]) {
    for v in values {
        let x = v.to_f32().unwrap_or(f32::NAN);
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

/// Serializes parameters (converted to `f32`) together with the spec's
/// identifying dimensions.
pub fn encode_weights<T: Scalar>(params: &ParameterStore<T>, spec: &NetworkSpec) -> Result<Vec<u8>, FormatError> {
    params.check(spec).map_err(|e| FormatError::Invalid(e.to_string()))?;
    let mut buf = Vec::with_capacity(PREFIX + 4 * params.scalar_count() + 64 * params.len());
    buf.extend_from_slice(WEIGHTS_MAGIC);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    put_u32(&mut buf, spec.k);
    put_u32(&mut buf, spec.c);
    put_u32(&mut buf, spec.n);
    buf.push(spec.variant.tag());
    put_u32(&mut buf, params.len());
    for layer in params.layers() {
        let k = &layer.kernel;
        put_u32(&mut buf, layer.id);
        put_u32(&mut buf, k.out_channels());
        put_u32(&mut buf, k.in_channels());
        put_u32(&mut buf, k.kernel_size());
        buf.push(u8::from(layer.running.is_some()));
        put_f32s(&mut buf, k.data());
        put_f32s(&mut buf, &layer.bias);
        if let Some(r) = &layer.running {
            put_f32s(&mut buf, &r.mean);
            put_f32s(&mut buf, &r.var);
        }
    }
    let crc = crc32fast::hash(&buf[PREFIX..]);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(FormatError::Truncated)?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, FormatError> {
        let bytes = self.take(n.checked_mul(4).ok_or(FormatError::Truncated)?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
}

struct Header {
    k: usize,
    c: usize,
    n: usize,
    variant: u8,
}

fn parse(bytes: &[u8]) -> Result<(Header, Vec<LayerParams<f32>>, usize), FormatError> {
    let mut cur = Cursor { bytes, pos: PREFIX };
    let header = Header { k: cur.u32()?, c: cur.u32()?, n: cur.u32()?, variant: cur.u8()? };
    let count = cur.u32()?;
    let mut layers = Vec::new();
    for _ in 0..count {
        let id = cur.u32()?;
        let (out, inp, ks) = (cur.u32()?, cur.u32()?, cur.u32()?);
        let has_bn = cur.u8()?;
        let weights = cur.f32s(out.saturating_mul(inp).saturating_mul(ks))?;
        let bias = cur.f32s(out)?;
        let running = match has_bn {
            0 => None,
            1 => Some(RunningStats { mean: cur.f32s(out)?, var: cur.f32s(out)? }),
            other => return Err(FormatError::Invalid(format!("bad batch-norm flag {other}"))),
        };
        let kernel = Kernel::new(out, inp, ks, weights).map_err(|e| FormatError::Invalid(e.to_string()))?;
        layers.push(LayerParams { id, kernel, bias, running });
    }
    Ok((header, layers, cur.pos))
}

/// Parses and verifies a weights file image. Errors are checked in order:
/// magic, version, truncation, checksum, then consistency with the spec.
pub fn decode_weights(bytes: &[u8]) -> Result<(ParameterStore<f32>, NetworkSpec), FormatError> {
    if bytes.len() < PREFIX {
        return Err(FormatError::Truncated);
    }
    if &bytes[..4] != WEIGHTS_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != WEIGHTS_VERSION {
        return Err(FormatError::Version { found: version, supported: WEIGHTS_VERSION });
    }
    let (header, layers, end) = parse(bytes)?;
    match bytes.len().checked_sub(end) {
        Some(4) => {}
        Some(n) if n < 4 => return Err(FormatError::Truncated),
        None => return Err(FormatError::Truncated),
        Some(n) => return Err(FormatError::Invalid(format!("{} trailing bytes", n - 4))),
    }
    let stored = u32::from_le_bytes(bytes[end..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[PREFIX..end]);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }
    let variant = Variant::from_tag(header.variant)
        .ok_or_else(|| FormatError::Invalid(format!("unknown variant tag {}", header.variant)))?;
    let spec =
        NetworkSpec::build(variant, header.k, header.n, header.c).map_err(|e| FormatError::Invalid(e.to_string()))?;
    let params = ParameterStore::from_layers(&spec, layers).map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok((params, spec))
}

pub fn save_weights<T: Scalar>(
    params: &ParameterStore<T>,
    spec: &NetworkSpec,
    path: impl AsRef<Path>,
) -> Result<(), FormatError> {
    fs::write(path, encode_weights(params, spec)?)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(ParameterStore<f32>, NetworkSpec), FormatError> {
    decode_weights(&fs::read(path)?)
}
