//! "MRIT" binary raster: magic `MRIT`, version byte, dtype byte (1 = f32),
//! ndim byte, `ndim` little-endian u32 dims, then the row-major
//! little-endian payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 4] = b"MRIT";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;

pub fn encode_raster(t: &Tensor<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(7 + 4 * t.dims().len() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(DTYPE_F32);
    out.push(t.dims().len() as u8);
    for &d in t.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_raster(bytes: &[u8], path: &Path) -> Result<Tensor<f32>> {
    let truncated = |expected: usize| Error::Truncated {
        path: path.to_path_buf(),
        expected,
        found: bytes.len(),
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: "MRIT",
        });
    }
    if bytes.len() < 7 {
        return Err(truncated(7));
    }
    if bytes[4] != VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found: bytes[4],
        });
    }
    if bytes[5] != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(bytes[5]));
    }
    let ndim = bytes[6] as usize;
    let header = 7 + 4 * ndim;
    if bytes.len() < header {
        return Err(truncated(header));
    }
    let dims: Vec<usize> = bytes[7..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let n: usize = dims.iter().product();
    let expected = header + 4 * n;
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    let data = bytes[header..expected]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::new(dims, data)
}

pub fn save_raster(path: impl AsRef<Path>, t: &Tensor<f32>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_raster(t)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_raster(&bytes, path)
}
