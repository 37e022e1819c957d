//! HSIC binary cube format, little-endian:
//!
//! | bytes   | content                                          |
//! |---------|--------------------------------------------------|
//! | 0..4    | magic `HSIC`                                     |
//! | 4       | version, `1`                                     |
//! | 5       | sample type, `0` = 32-bit float                  |
//! | 6..8    | flags, bit 0 = normalization block present       |
//! | 8..20   | rows, cols, bands as `u32`                       |
//! | 20..    | `rows*cols*bands` floats, band-sequential        |
//! | trailer | if flag bit 0: `bands` pairs of floats (min, max) |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::HsiCube;
use crate::{Error, Result};

pub const HSIC_MAGIC: [u8; 4] = *b"HSIC";
pub const HSIC_VERSION: u8 = 1;
const DTYPE_F32: u8 = 0;
const FLAG_NORM: u16 = 1;
const HEADER_LEN: usize = 20;

pub fn load_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(cube))?;
    Ok(())
}

pub fn read_cube(mut reader: impl Read) -> Result<HsiCube> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn write_cube(cube: &HsiCube, mut writer: impl Write) -> Result<()> {
    writer.write_all(&encode(cube))?;
    Ok(())
}

fn encode(cube: &HsiCube) -> Vec<u8> {
    let norm_len = cube.norm().map_or(0, |n| n.len() * 8);
    let mut out = Vec::with_capacity(HEADER_LEN + cube.data().len() * 4 + norm_len);
    out.extend_from_slice(&HSIC_MAGIC);
    out.push(HSIC_VERSION);
    out.push(DTYPE_F32);
    let flags = if cube.norm().is_some() { FLAG_NORM } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for dim in [cube.rows(), cube.cols(), cube.bands()] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in cube.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(ranges) = cube.norm() {
        for (lo, hi) in ranges {
            out.extend_from_slice(&lo.to_le_bytes());
            out.extend_from_slice(&hi.to_le_bytes());
        }
    }
    out
}

fn decode(bytes: &[u8]) -> Result<HsiCube> {
    let mut found = [0u8; 4];
    let n = bytes.len().min(4);
    found[..n].copy_from_slice(&bytes[..n]);
    if n < 4 {
        return Err(Error::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    if found != HSIC_MAGIC {
        return Err(Error::BadMagic {
            expected: HSIC_MAGIC,
            found,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    if bytes[4] != HSIC_VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(bytes[5]));
    }
    let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (rows, cols, bands) = (dim(8), dim(12), dim(16));
    for (value, name) in [(rows, "rows"), (cols, "cols"), (bands, "bands")] {
        if value == 0 {
            return Err(Error::ZeroDimension(name));
        }
    }

    let count = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(bands))
        .ok_or_else(|| Error::InvalidArgument("cube dimensions overflow".into()))?;
    let has_norm = flags & FLAG_NORM != 0;
    let needed = HEADER_LEN + count * 4 + if has_norm { bands * 8 } else { 0 };
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            available: bytes.len(),
        });
    }

    let floats = |start: usize, n: usize| -> Vec<f32> {
        bytes[start..start + n * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let data = floats(HEADER_LEN, count);
    let norm = has_norm.then(|| {
        floats(HEADER_LEN + count * 4, bands * 2)
            .chunks_exact(2)
            .map(|p| (p[0], p[1]))
            .collect()
    });
    HsiCube::with_norm(rows, cols, bands, data, norm)
}
