//! IAPT tensor dumps.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "IAPT"
//! 4       2           version (u16, = 1)
//! 6       2           ndim (u16, >= 1)
//! 8       4*ndim      dims (u32 each, all > 0)
//! ...     4*prod(dims) data (f32, row-major)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::semantic::{FeatureMatrix, TextEmbedding};
use crate::types::TokenGrid;

pub const MAGIC: &[u8; 4] = b"IAPT";
pub const VERSION: u16 = 1;

/// Dense row-major f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() || dims.len() > usize::from(u16::MAX) {
            return Err(Error::Shape(format!(
                "tensor rank {} unsupported",
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0 || d > u32::MAX as usize) {
            return Err(Error::Shape(format!(
                "tensor dims {dims:?} must be in 1..=u32::MAX"
            )));
        }
        let count: usize = dims.iter().product();
        if count != data.len() {
            return Err(Error::Shape(format!(
                "tensor dims {dims:?} need {count} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn from_features(f: &FeatureMatrix) -> Self {
        Self {
            dims: vec![f.tokens(), f.dim()],
            data: f.as_slice().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_text(t: &TextEmbedding) -> Self {
        Self {
            dims: vec![t.dim()],
            data: t.values().iter().map(|&v| v as f32).collect(),
        }
    }

    /// Interpret a `[N, D]` tensor as features on `grid`.
    pub fn to_features(&self, grid: TokenGrid) -> Result<FeatureMatrix> {
        match self.dims.as_slice() {
            &[n, d] if n == grid.total() => {
                FeatureMatrix::new(grid, d, self.data.iter().map(|&v| f64::from(v)).collect())
            }
            dims => Err(Error::Shape(format!(
                "feature tensor {dims:?} does not match [{}, D] for grid {grid}",
                grid.total()
            ))),
        }
    }

    /// Interpret a `[D]` tensor as a text embedding.
    pub fn to_text(&self) -> Result<TextEmbedding> {
        match self.dims.as_slice() {
            &[_] => TextEmbedding::new(self.data.iter().map(|&v| f64::from(v)).collect()),
            dims => Err(Error::Shape(format!(
                "text tensor must be 1-D, got {dims:?}"
            ))),
        }
    }
}

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.dims.len() + 4 * t.data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(t.dims.len() as u16).to_le_bytes());
    for &d in &t.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected \"IAPT\""));
    }
    if bytes.len() < 8 {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    let version = u16_at(bytes, 4);
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let ndim = usize::from(u16_at(bytes, 6));
    if ndim == 0 {
        return Err(Error::format(6, "ndim must be at least 1"));
    }
    let header = 8 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::format(bytes.len() as u64, "truncated dims"));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut count: u64 = 1;
    for k in 0..ndim {
        let at = 8 + 4 * k;
        let d = u32_at(bytes, at);
        if d == 0 {
            return Err(Error::format(at as u64, format!("dim {k} is zero")));
        }
        count = count
            .checked_mul(u64::from(d))
            .filter(|&c| c <= (usize::MAX / 4) as u64)
            .ok_or_else(|| Error::format(at as u64, "element count overflows"))?;
        dims.push(d as usize);
    }
    let expected = header as u64 + 4 * count;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::format(
            actual,
            format!("truncated data: expected {expected} bytes, file has {actual}"),
        ));
    }
    if actual > expected {
        return Err(Error::format(
            expected,
            format!("{} trailing bytes after data", actual - expected),
        ));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Tensor { dims, data })
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes).map_err(|e| match e {
        Error::Format { offset, reason } => Error::Format {
            offset,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(t)).map_err(|e| Error::io(path, e))
}
