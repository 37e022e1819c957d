//! Shared fixtures for the benchmarks.

use ssgn_core::synthetic::smooth_cube;
use ssgn_core::train::{Sampler, TrainConfig};
use ssgn_core::{HsiCube, NoiseCase, NoiseSpec, Tensor4};

/// Normalized smooth cube.
pub fn scene(rows: usize, cols: usize, bands: usize) -> HsiCube {
    smooth_cube(rows, cols, bands, 1)
        .normalize_per_band()
        .expect("synthetic cube is finite")
}

/// The desk profile on Gaussian plus stripe noise.
pub fn desk_config(bands: usize) -> TrainConfig {
    let mut config = TrainConfig::desk();
    config.noise = NoiseSpec::new(NoiseCase::GaussianStripe, 0).scaled_to_bands(bands);
    config
}

/// First training batch of the desk profile on a 96x96x16 scene, as
/// `(input, residual target, spectral target)`.
pub fn desk_batch() -> (ssgn_core::SsgnInput<f32>, Tensor4<f32>, Tensor4<f32>) {
    let cubes = [scene(96, 96, 16)];
    let config = desk_config(16);
    let sampler = Sampler::new(&cubes, &config).expect("valid desk setup");
    sampler
        .batch(0, 0)
        .and_then(|b| b.tensors())
        .expect("desk batch")
}

/// Deterministic pseudo-random tensor in `[-1, 1)`.
pub fn tensor(dims: [usize; 4], seed: u64) -> Tensor4<f32> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    Tensor4::from_fn(dims, |_| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 40) as f32 / (1u64 << 23) as f32 - 1.0
    })
}
