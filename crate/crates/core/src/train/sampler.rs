//! Deterministic training-batch construction with on-the-fly noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augment::{patch_grid, resize_bilinear_window, rotate90, scaled_dims, Augmentation, QUARTER_TURNS, SCALES};
use crate::cube::{Band, HsiCube};
use crate::gradient::{build_gradient_stack, spectral_gradients, GradientStack};
use crate::model::SsgnInput;
use crate::noise::simulate_case;
use crate::tensor::{Scalar, Tensor4};
use crate::train::TrainConfig;
use crate::{Error, Result};

const PURPOSE_ORDER: u64 = 1;
const PURPOSE_PATCH: u64 = 2;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn derived_rng(seed: u64, purpose: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed ^ purpose) ^ a) ^ b))
}

/// One training patch: where it comes from in the clean data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchRef {
    pub cube: usize,
    pub band: usize,
    pub row: usize,
    pub col: usize,
}

/// A network input with its targets.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub patch: PatchRef,
    pub augmentation: Augmentation,
    /// Stack built from the noisy patch.
    pub stack: GradientStack,
    /// Noisy minus clean band.
    pub residual_target: Band,
    /// Spectral gradients of the clean patch over the stack's window.
    pub spectral_target: Vec<Band>,
}

#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub samples: Vec<TrainSample>,
}

impl TrainBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Network input, `(N, 1, P, P)` residual targets and `(N, K, P, P)` spectral targets.
    pub fn tensors<T: Scalar>(&self) -> Result<(SsgnInput<T>, Tensor4<T>, Tensor4<T>)> {
        let stacks: Vec<GradientStack> = self.samples.iter().map(|s| s.stack.clone()).collect();
        let input = SsgnInput::from_stacks(&stacks)?;
        let [n, _, h, w] = input.band.dims();
        let k = input.spectral.channels();
        let cast = |b: &Band| b.data().iter().map(|&v| T::from_f64(v as f64)).collect::<Vec<T>>();
        let res: Vec<T> = self.samples.iter().flat_map(|s| cast(&s.residual_target)).collect();
        let spec: Vec<T> = self
            .samples
            .iter()
            .flat_map(|s| s.spectral_target.iter().flat_map(&cast))
            .collect();
        Ok((
            input,
            Tensor4::from_vec([n, 1, h, w], res)?,
            Tensor4::from_vec([n, k, h, w], spec)?,
        ))
    }
}

/// Enumerates the patches of a clean training set and draws batches from it.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    cubes: &'a [HsiCube],
    config: &'a TrainConfig,
    patches: Vec<PatchRef>,
}

impl<'a> Sampler<'a> {
    pub fn new(cubes: &'a [HsiCube], config: &'a TrainConfig) -> Result<Self> {
        if cubes.is_empty() {
            return Err(Error::InvalidArgument("no training cubes".into()));
        }
        let mut patches = Vec::new();
        for (ci, cube) in cubes.iter().enumerate() {
            if !cube.is_normalized() {
                return Err(Error::MissingNormalization);
            }
            if cube.bands() <= config.arch.adjacent_bands {
                return Err(Error::WindowTooLarge {
                    window: config.arch.adjacent_bands + 1,
                    bands: cube.bands(),
                });
            }
            let grid = patch_grid(cube.rows(), cube.cols(), config.patch, config.stride)?;
            for band in 0..cube.bands() {
                patches.extend(grid.iter().map(|&(row, col)| PatchRef {
                    cube: ci,
                    band,
                    row,
                    col,
                }));
            }
        }
        Ok(Self { cubes, config, patches })
    }

    pub fn patch_count(&self) -> usize {
        self.patches.len()
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.patches.len().div_ceil(self.config.batch_size)
    }

    /// Patch visiting order for `epoch`.
    pub fn epoch_order(&self, epoch: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.patches.len()).collect();
        order.shuffle(&mut derived_rng(self.config.seed, PURPOSE_ORDER, epoch as u64, 0));
        order
    }

    /// Batch `index` of `epoch`; the final batch of an epoch may be short.
    pub fn batch(&self, epoch: usize, index: usize) -> Result<TrainBatch> {
        self.batch_from_order(&self.epoch_order(epoch), epoch, index)
    }

    pub(crate) fn batch_from_order(&self, order: &[usize], epoch: usize, index: usize) -> Result<TrainBatch> {
        let bs = self.config.batch_size;
        let start = index * bs;
        if start >= order.len() {
            return Err(Error::InvalidArgument(format!(
                "batch {index} beyond the {} batches of an epoch",
                self.batches_per_epoch()
            )));
        }
        let samples = order[start..(start + bs).min(order.len())]
            .iter()
            .map(|&pid| self.sample(epoch, pid))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainBatch { samples })
    }

    fn sample(&self, epoch: usize, pid: usize) -> Result<TrainSample> {
        let patch = self.patches[pid];
        let cube = &self.cubes[patch.cube];
        let p = self.config.patch;
        let mut rng = derived_rng(self.config.seed, PURPOSE_PATCH, epoch as u64, pid as u64);

        let augmentation = if self.config.augmentation {
            let fitting: Vec<f64> = SCALES
                .iter()
                .copied()
                .filter(|&s| scaled_dims(cube.rows(), cube.cols(), s).is_ok_and(|(r, c)| r >= p && c >= p))
                .collect();
            if fitting.is_empty() {
                return Err(Error::PatchTooLarge {
                    patch: p,
                    rows: cube.rows(),
                    cols: cube.cols(),
                });
            }
            Augmentation {
                quarter_turns: QUARTER_TURNS[rng.random_range(0..QUARTER_TURNS.len())],
                scale: fitting[rng.random_range(0..fitting.len())],
            }
        } else {
            Augmentation::IDENTITY
        };
        let noise_seed: u64 = rng.random();

        let clean = self.clean_patch(cube, patch, augmentation)?;
        let mut spec = self.config.noise.clone();
        spec.seed = noise_seed;
        let (noisy, _) = simulate_case(&clean, &spec)?;

        let k = patch.band;
        let stack = build_gradient_stack(&noisy, k, self.config.arch.adjacent_bands)?;
        let spectral_target = spectral_gradients(&clean, k, &stack.window)?;
        let noisy_k = noisy.band(k);
        let residual = noisy_k.iter().zip(clean.band(k)).map(|(y, x)| y - x).collect();
        Ok(TrainSample {
            patch,
            augmentation,
            stack,
            residual_target: Band::new(p, p, residual)?,
            spectral_target,
        })
    }

    /// The `P x P x B` clean sub-cube under `patch`, rescaled and rotated.
    fn clean_patch(&self, cube: &HsiCube, patch: PatchRef, aug: Augmentation) -> Result<HsiCube> {
        let p = self.config.patch;
        let bands = (0..cube.bands())
            .map(|b| {
                let band = cube.band_plane(b);
                let window = if aug.scale == 1.0 {
                    band.crop(patch.row, patch.col, p, p)?
                } else {
                    let (rows, cols) = scaled_dims(cube.rows(), cube.cols(), aug.scale)?;
                    let row0 = ((patch.row as f64 * aug.scale).round() as usize).min(rows - p);
                    let col0 = ((patch.col as f64 * aug.scale).round() as usize).min(cols - p);
                    resize_bilinear_window(&band, aug.scale, row0, col0, p, p)?
                };
                Ok(rotate90(&window, aug.quarter_turns))
            })
            .collect::<Result<Vec<_>>>()?;
        HsiCube::from_bands(&bands)
    }
}

/// Batch `index` of `epoch` for the given clean cubes and config.
pub fn sample_batch(cubes: &[HsiCube], config: &TrainConfig, epoch: usize, index: usize) -> Result<TrainBatch> {
    Sampler::new(cubes, config)?.batch(epoch, index)
}
