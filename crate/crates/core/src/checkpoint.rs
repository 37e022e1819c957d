//! SSGN checkpoint files, little-endian:
//!
//! | field            | content                                                |
//! |------------------|--------------------------------------------------------|
//! | magic            | `SSGN`                                                 |
//! | version          | one byte, `1`                                          |
//! | arch             | `K`, `L`, `c_scale` as `u32`                           |
//! | tensors          | per parameter tensor: 4 dims as `u32`, then f32 values |
//! | optimizer flag   | one byte, `0` = absent, `1` = Adam block follows       |
//! | Adam block       | step count `u64`, then all first moments, then all second moments, tensor by tensor |
//!
//! Tensors follow [`SsgnModel::param_slices`]: for each convolution its
//! kernel `(out, in, k, k)` then its bias `(out, 1, 1, 1)`, with convolutions
//! ordered band branch, gradient branch, spectral branch, cascade blocks
//! `1..=L`, residual head, spectral head, and kernel sizes 3, 5, 7 within
//! each multi-scale block.

use std::fs;
use std::path::Path;

use crate::model::{SsgnArch, SsgnModel};
use crate::train::AdamState;
use crate::{Error, Result};

pub const SSGN_MAGIC: [u8; 4] = *b"SSGN";
pub const SSGN_VERSION: u8 = 1;

pub fn save_model(model: &SsgnModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    save_checkpoint(model, None, path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SsgnModel<f32>> {
    load_checkpoint(path).map(|(model, _)| model)
}

pub fn save_checkpoint(model: &SsgnModel<f32>, adam: Option<&AdamState<f32>>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model, adam)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(SsgnModel<f32>, Option<AdamState<f32>>)> {
    decode_checkpoint(&fs::read(path)?)
}

pub fn encode_checkpoint(model: &SsgnModel<f32>, adam: Option<&AdamState<f32>>) -> Result<Vec<u8>> {
    let slices = model.param_slices();
    if let Some(state) = adam {
        let lengths: Vec<usize> = slices.iter().map(|s| s.len()).collect();
        if state.lengths() != lengths || state.v.iter().map(Vec::len).ne(lengths.iter().copied()) {
            return Err(Error::ShapeMismatch("optimizer state does not match the model".into()));
        }
    }
    let mut out = Vec::with_capacity(64 + 4 * model.num_params() * if adam.is_some() { 3 } else { 1 });
    out.extend_from_slice(&SSGN_MAGIC);
    out.push(SSGN_VERSION);
    let arch = model.arch;
    for v in [arch.adjacent_bands, arch.blocks, arch.c_scale] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for (dims, data) in model.param_shapes().iter().zip(&slices) {
        for d in dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        put_floats(&mut out, data);
    }
    match adam {
        None => out.push(0),
        Some(state) => {
            out.push(1);
            out.extend_from_slice(&state.t.to_le_bytes());
            for m in &state.m {
                put_floats(&mut out, m);
            }
            for v in &state.v {
                put_floats(&mut out, v);
            }
        }
    }
    Ok(out)
}

fn put_floats(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(Error::Truncated {
                needed: self.pos + n,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    fn floats(&mut self, dst: &mut [f32]) -> Result<()> {
        let bytes = self.take(dst.len() * 4)?;
        for (d, chunk) in dst.iter_mut().zip(bytes.chunks_exact(4)) {
            *d = f32::from_le_bytes(chunk.try_into().expect("four bytes"));
        }
        Ok(())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(SsgnModel<f32>, Option<AdamState<f32>>)> {
    let mut r = Reader { bytes, pos: 0 };
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            needed: 4,
            available: bytes.len(),
        });
    }
    let found: [u8; 4] = r.take(4)?.try_into().expect("four bytes");
    if found != SSGN_MAGIC {
        return Err(Error::BadMagic {
            expected: SSGN_MAGIC,
            found,
        });
    }
    let version = r.u8()?;
    if version != SSGN_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let arch = SsgnArch {
        adjacent_bands: r.u32()? as usize,
        blocks: r.u32()? as usize,
        c_scale: r.u32()? as usize,
    };
    arch.validate()
        .map_err(|e| Error::ArchMismatch(format!("invalid architecture block {arch:?}: {e}")))?;

    let mut model = SsgnModel::<f32>::zeros(arch)?;
    let shapes = model.param_shapes();
    for (i, (expected, slice)) in shapes.iter().zip(model.param_slices_mut()).enumerate() {
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        if &dims != expected {
            return Err(Error::ArchMismatch(format!(
                "tensor {i} has dims {dims:?}, architecture {arch:?} implies {expected:?}"
            )));
        }
        r.floats(slice)?;
    }

    let adam = match r.u8()? {
        0 => None,
        1 => {
            let mut state = AdamState::<f32>::for_model(&model);
            state.t = r.u64()?;
            for m in &mut state.m {
                r.floats(m)?;
            }
            for v in &mut state.v {
                r.floats(v)?;
            }
            Some(state)
        }
        flag => return Err(Error::InvalidArgument(format!("unknown optimizer flag {flag}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::InvalidArgument(format!(
            "{} trailing bytes after checkpoint",
            bytes.len() - r.pos
        )));
    }
    Ok((model, adam))
}
