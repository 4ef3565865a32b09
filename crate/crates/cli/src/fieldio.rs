//! GKP1 binary field files.
//!
//! Layout (little-endian): the magic `GKP1`, `u32 Nx`, `u32 Ny`, `f64 Lx`,
//! `f64 Ly`, then `Nx·Ny` `f64` samples with x as the fast axis.

use std::path::Path;
use std::sync::Arc;

use gkp_core::{Field, Grid};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"GKP1";
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic at offset 0: expected \"GKP1\", found {found:02x?}")]
    BadMagic { found: Vec<u8> },
    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing data: expected {expected} bytes, found {actual}")]
    Trailing { expected: usize, actual: usize },
    #[error("dimensions {nx} x {ny} overflow the addressable size")]
    DimensionOverflow { nx: u32, ny: u32 },
    #[error("invalid header: {0}")]
    Header(#[from] gkp_core::Error),
}

pub fn encode(field: &Field) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    out.extend_from_slice(&g.lx().to_le_bytes());
    out.extend_from_slice(&g.ly().to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Field, FieldIoError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FieldIoError::BadMagic {
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(FieldIoError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (nx, ny) = (u32_at(4), u32_at(8));
    let (lx, ly) = (f64_at(12), f64_at(20));
    let expected = (nx as usize)
        .checked_mul(ny as usize)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(FieldIoError::DimensionOverflow { nx, ny })?;
    if bytes.len() < expected {
        return Err(FieldIoError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FieldIoError::Trailing {
            expected,
            actual: bytes.len(),
        });
    }
    let grid = Arc::new(Grid::new(lx, ly, nx as usize, ny as usize)?);
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Field::from_values(&grid, values)?)
}

pub fn write_field(path: &Path, field: &Field) -> Result<(), FieldIoError> {
    std::fs::write(path, encode(field))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field, FieldIoError> {
    decode(&std::fs::read(path)?)
}
