//! Smooth synthetic scenes for tests and demos.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::HsiCube;

const MATERIALS: usize = 4;

/// A linear mixture of a few materials with smooth spectra and smoothly
/// varying abundances. Values lie in roughly `[0.05, 0.95]`.
pub fn smooth_cube(rows: usize, cols: usize, bands: usize, seed: u64) -> HsiCube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let spectra: Vec<Vec<f64>> = (0..MATERIALS)
        .map(|_| {
            let level = rng.random_range(0.25..0.75);
            let amp = rng.random_range(0.1..0.2);
            let freq = rng.random_range(0.3..1.5);
            let phase = rng.random_range(0.0..TAU);
            let tilt = rng.random_range(-0.1..0.1);
            (0..bands)
                .map(|b| {
                    let t = b as f64 / bands.max(2) as f64;
                    level + amp * (TAU * freq * t + phase).sin() + tilt * (t - 0.5)
                })
                .collect()
        })
        .collect();

    // Each abundance field is a sum of broad Gaussian blobs.
    let blobs: Vec<Vec<(f64, f64, f64, f64)>> = (0..MATERIALS)
        .map(|_| {
            (0..3)
                .map(|_| {
                    (
                        rng.random_range(0.0..rows as f64),
                        rng.random_range(0.0..cols as f64),
                        rng.random_range(0.15..0.4) * rows.max(cols) as f64,
                        rng.random_range(0.5..1.5),
                    )
                })
                .collect()
        })
        .collect();

    let mut data = vec![0.0f32; rows * cols * bands];
    let mut weights = [0.0f64; MATERIALS];
    for r in 0..rows {
        for c in 0..cols {
            for (w, material) in weights.iter_mut().zip(&blobs) {
                *w = 0.05
                    + material
                        .iter()
                        .map(|&(cr, cc, width, height)| {
                            let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                            height * (-d2 / (2.0 * width * width)).exp()
                        })
                        .sum::<f64>();
            }
            let total: f64 = weights.iter().sum();
            for b in 0..bands {
                let v: f64 = weights.iter().zip(&spectra).map(|(w, s)| w * s[b]).sum::<f64>() / total;
                data[b * rows * cols + r * cols + c] = v.clamp(0.0, 1.0) as f32;
            }
        }
    }
    HsiCube::new(rows, cols, bands, data).expect("dimensions are consistent")
}
