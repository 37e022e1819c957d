//! Spatial and spectral gradient features that make up the network input.
//!
//! Spatial gradients are forward differences set to zero on the trailing row
//! (`g_x`) or column (`g_y`), so every plane keeps the band's size. Spectral
//! planes are differences `band[j] - band[k]` between each adjacent band `j` of
//! the window and the current band `k`.

use crate::cube::{Band, HsiCube};
use crate::{Error, Result};

/// Per-band network input: the band itself plus its gradient planes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientStack {
    pub band_index: usize,
    pub window: Vec<usize>,
    pub y_k: Band,
    pub g_x: Band,
    pub g_y: Band,
    pub g_z: Vec<Band>,
}

impl GradientStack {
    pub fn dims(&self) -> (usize, usize) {
        self.y_k.dims()
    }

    pub fn adjacent_bands(&self) -> usize {
        self.g_z.len()
    }
}

/// `(g_x, g_y)`: `g_x(m, n) = b(m+1, n) - b(m, n)`, `g_y(m, n) = b(m, n+1) - b(m, n)`.
pub fn spatial_gradients(band: &Band) -> (Band, Band) {
    let (rows, cols) = band.dims();
    let g_x = Band::from_fn(rows, cols, |m, n| {
        if m + 1 < rows {
            band.get(m + 1, n) - band.get(m, n)
        } else {
            0.0
        }
    });
    let g_y = Band::from_fn(rows, cols, |m, n| {
        if n + 1 < cols {
            band.get(m, n + 1) - band.get(m, n)
        } else {
            0.0
        }
    });
    (g_x, g_y)
}

/// The `k_adjacent` band indices nearest `k`, excluding `k`, sorted ascending.
///
/// Nominally `k - K/2 ..= k + K/2` without `k`; near either end of the
/// spectrum the range slides inward so that exactly `K` indices remain.
pub fn spectral_window(k: usize, bands: usize, k_adjacent: usize) -> Result<Vec<usize>> {
    if k_adjacent == 0 || !k_adjacent.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "adjacent band count must be even and positive, got {k_adjacent}"
        )));
    }
    if k_adjacent >= bands {
        return Err(Error::WindowTooLarge {
            window: k_adjacent,
            bands,
        });
    }
    if k >= bands {
        return Err(Error::InvalidArgument(format!("band {k} out of range for {bands} bands")));
    }
    let half = k_adjacent / 2;
    let start = k.saturating_sub(half).min(bands - 1 - k_adjacent);
    Ok((start..=start + k_adjacent).filter(|&j| j != k).collect())
}

/// Planes `cube.band(window[j]) - cube.band(k)`.
pub fn spectral_gradients(cube: &HsiCube, k: usize, window: &[usize]) -> Result<Vec<Band>> {
    let bands = cube.bands();
    if k >= bands {
        return Err(Error::InvalidArgument(format!("band {k} out of range for {bands} bands")));
    }
    let current = cube.band(k);
    window
        .iter()
        .map(|&j| {
            if j >= bands {
                return Err(Error::InvalidArgument(format!(
                    "window band {j} out of range for {bands} bands"
                )));
            }
            let data = cube.band(j).iter().zip(current).map(|(a, b)| a - b).collect();
            Band::new(cube.rows(), cube.cols(), data)
        })
        .collect()
}

/// Assembles the full input stack for band `k`.
pub fn build_gradient_stack(cube: &HsiCube, k: usize, k_adjacent: usize) -> Result<GradientStack> {
    let window = spectral_window(k, cube.bands(), k_adjacent)?;
    let y_k = cube.band_plane(k);
    let (g_x, g_y) = spatial_gradients(&y_k);
    let g_z = spectral_gradients(cube, k, &window)?;
    Ok(GradientStack {
        band_index: k,
        window,
        y_k,
        g_x,
        g_y,
        g_z,
    })
}
