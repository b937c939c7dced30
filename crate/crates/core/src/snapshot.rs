//! ANSF field snapshots.
//!
//! Layout (little-endian): magic `b"ANSF"`, version `u8 = 1`, `n1: u32`,
//! `n2: u32`, then for each lattice point in `k₁`-major storage order the
//! pair `(û¹, û²)` as `(re, im)` doubles — `2·n1·n2` complex numbers in total.
//! The dealiasing fraction is not stored; decoded grids use the default.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, RawField, SpectralField};

pub const MAGIC: &[u8; 4] = b"ANSF";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4 + 4;

pub fn encode(field: &RawField) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 32 * g.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(g.n1 as u32).to_le_bytes());
    out.extend_from_slice(&(g.n2 as u32).to_le_bytes());
    for c in field.coeffs() {
        for z in c {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

/// Parses the byte layout without checking field invariants.
pub fn decode_raw(bytes: &[u8]) -> Result<RawField> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let n1 = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let n2 = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let grid = GridSpec::new(n1, n2).map_err(|e| Error::Format(e.to_string()))?;
    let expected = n1
        .checked_mul(n2)
        .and_then(|n| n.checked_mul(32))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format("grid size overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let body = &bytes[HEADER_LEN..];
    let read = |off: usize| f64::from_le_bytes(body[off..off + 8].try_into().unwrap());
    let coeffs = (0..grid.len())
        .map(|i| {
            let o = 32 * i;
            [Complex64::new(read(o), read(o + 8)), Complex64::new(read(o + 16), read(o + 24))]
        })
        .collect();
    RawField::from_coeffs(grid, coeffs)
}

/// Parses and validates a velocity snapshot.
pub fn decode(bytes: &[u8]) -> Result<SpectralField> {
    SpectralField::try_from_raw(decode_raw(bytes)?)
}

pub fn write(path: impl AsRef<Path>, field: &RawField) -> Result<()> {
    std::fs::write(path, encode(field))?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<SpectralField> {
    decode(&std::fs::read(path)?)
}
