//! Patch tiling and the rotation/rescaling augmentations used for training.

use rand::Rng;

use crate::cube::{Band, HsiCube};
use crate::{Error, Result};

/// Rotation steps available to augmentation, in quarter turns.
pub const QUARTER_TURNS: [u8; 4] = [0, 1, 2, 3];
/// Rescaling factors available to augmentation.
pub const SCALES: [f64; 4] = [0.8, 1.0, 1.2, 1.4];

/// Top-left corner of a training patch inside band `band`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchOrigin {
    pub band: usize,
    pub row: usize,
    pub col: usize,
}

/// Patch origins tiling a `rows x cols` plane; partial patches are dropped.
pub fn patch_grid(rows: usize, cols: usize, patch: usize, stride: usize) -> Result<Vec<(usize, usize)>> {
    if patch == 0 || stride == 0 {
        return Err(Error::InvalidArgument("patch and stride must be positive".into()));
    }
    if patch > rows || patch > cols {
        return Err(Error::PatchTooLarge { patch, rows, cols });
    }
    let mut origins = Vec::new();
    for row in (0..=rows - patch).step_by(stride) {
        for col in (0..=cols - patch).step_by(stride) {
            origins.push((row, col));
        }
    }
    Ok(origins)
}

/// All patch origins of a cube, band by band, each band tiled left-to-right, top-to-bottom.
pub fn extract_patches(cube: &HsiCube, patch: usize, stride: usize) -> Result<Vec<PatchOrigin>> {
    let grid = patch_grid(cube.rows(), cube.cols(), patch, stride)?;
    Ok((0..cube.bands())
        .flat_map(|band| grid.iter().map(move |&(row, col)| PatchOrigin { band, row, col }))
        .collect())
}

/// Rotates counterclockwise by `quarter_turns * 90` degrees.
///
/// One turn maps an `R x C` input to a `C x R` output with
/// `out(r, c) = in(c, C - 1 - r)`.
pub fn rotate90(band: &Band, quarter_turns: u8) -> Band {
    let mut out = band.clone();
    for _ in 0..quarter_turns % 4 {
        out = rotate_once(&out);
    }
    out
}

fn rotate_once(band: &Band) -> Band {
    let (rows, cols) = band.dims();
    Band::from_fn(cols, rows, |r, c| band.get(c, cols - 1 - r))
}

/// Output size of a bilinear rescale, `round(scale * dim)` per axis.
pub fn scaled_dims(rows: usize, cols: usize, scale: f64) -> Result<(usize, usize)> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let out_rows = (rows as f64 * scale).round() as usize;
    let out_cols = (cols as f64 * scale).round() as usize;
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::ZeroDimension("rescaled band"));
    }
    Ok((out_rows, out_cols))
}

/// Bilinear rescale using half-pixel centres, `src = (dst + 0.5) / scale - 0.5`,
/// with source coordinates clamped to the band.
pub fn resize_bilinear(band: &Band, scale: f64) -> Result<Band> {
    let (out_rows, out_cols) = scaled_dims(band.rows(), band.cols(), scale)?;
    resize_bilinear_window(band, scale, 0, 0, out_rows, out_cols)
}

/// The `rows x cols` window at `(row0, col0)` of the rescaled band, without
/// materialising the rest of it.
pub fn resize_bilinear_window(
    band: &Band,
    scale: f64,
    row0: usize,
    col0: usize,
    rows: usize,
    cols: usize,
) -> Result<Band> {
    let (out_rows, out_cols) = scaled_dims(band.rows(), band.cols(), scale)?;
    if row0 + rows > out_rows || col0 + cols > out_cols {
        return Err(Error::InvalidArgument(format!(
            "window {rows}x{cols} at ({row0}, {col0}) outside rescaled {out_rows}x{out_cols}"
        )));
    }
    let taps = |dst: usize, len: usize| -> (usize, usize, f64) {
        let src = ((dst as f64 + 0.5) / scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, src - i0 as f64)
    };
    let col_taps: Vec<_> = (col0..col0 + cols).map(|c| taps(c, band.cols())).collect();
    let mut data = Vec::with_capacity(rows * cols);
    for r in row0..row0 + rows {
        let (r0, r1, fr) = taps(r, band.rows());
        for &(c0, c1, fc) in &col_taps {
            let top = band.get(r0, c0) as f64 * (1.0 - fc) + band.get(r0, c1) as f64 * fc;
            let bottom = band.get(r1, c0) as f64 * (1.0 - fc) + band.get(r1, c1) as f64 * fc;
            data.push((top * (1.0 - fr) + bottom * fr) as f32);
        }
    }
    Band::new(rows, cols, data)
}

/// One rotation/scale combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Augmentation {
    pub quarter_turns: u8,
    pub scale: f64,
}

impl Augmentation {
    pub const IDENTITY: Augmentation = Augmentation {
        quarter_turns: 0,
        scale: 1.0,
    };

    /// The full 4 x 4 grid of variants, for dataset-multiplying augmentation.
    pub fn all() -> Vec<Augmentation> {
        QUARTER_TURNS
            .iter()
            .flat_map(|&quarter_turns| SCALES.iter().map(move |&scale| Augmentation { quarter_turns, scale }))
            .collect()
    }

    /// Draws one variant uniformly from the grid.
    pub fn sample(rng: &mut impl Rng) -> Augmentation {
        Augmentation {
            quarter_turns: QUARTER_TURNS[rng.random_range(0..QUARTER_TURNS.len())],
            scale: SCALES[rng.random_range(0..SCALES.len())],
        }
    }

    /// Rescales the whole band, then rotates it.
    pub fn apply(&self, band: &Band) -> Result<Band> {
        let scaled = if self.scale == 1.0 {
            band.clone()
        } else {
            resize_bilinear(band, self.scale)?
        };
        Ok(rotate90(&scaled, self.quarter_turns))
    }
}
