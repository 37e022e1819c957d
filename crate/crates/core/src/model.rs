//! The spatial-spectral gradient network.
//!
//! Three input branches (the noisy band, its two spatial gradients, and its
//! `K` spectral-gradient planes) each run a multi-scale block: parallel 3x3,
//! 5x5 and 7x7 convolutions with ReLU, concatenated to `3 * c_scale`
//! channels. The branch outputs are concatenated into the fusion map. Block
//! `l` of the cascade sees the fusion map plus every earlier block output.
//! Two linear 3x3 heads read the fusion map and all block outputs: one
//! predicts the noise residual of the band, the other the clean spectral
//! gradients of its window.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cube::Band;
use crate::gradient::GradientStack;
use crate::ops::{
    concat_channels, conv2d_backward_impl, conv2d_forward, relu_backward, relu_forward, split_channels, ConvParams,
};
use crate::tensor::{Scalar, Tensor4};
use crate::{Error, Result};

pub const KERNEL_SIZES: [usize; 3] = [3, 5, 7];
const HEAD_KERNEL: usize = 3;

/// Architecture descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsgnArch {
    /// Number of adjacent bands `K` in the spectral window.
    pub adjacent_bands: usize,
    /// Cascade depth `L`.
    pub blocks: usize,
    /// Output channels per kernel size in every multi-scale block.
    pub c_scale: usize,
}

impl SsgnArch {
    /// Full-size network: `K = 24`, five blocks, 30-channel blocks.
    pub const FULL: SsgnArch = SsgnArch {
        adjacent_bands: 24,
        blocks: 5,
        c_scale: 10,
    };

    /// Small network that trains in minutes on a CPU.
    pub const DESK: SsgnArch = SsgnArch {
        adjacent_bands: 4,
        blocks: 2,
        c_scale: 4,
    };

    pub fn validate(&self) -> Result<()> {
        if self.adjacent_bands < 2 || !self.adjacent_bands.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "adjacent band count must be even and >= 2, got {}",
                self.adjacent_bands
            )));
        }
        if self.blocks == 0 || self.c_scale == 0 {
            return Err(Error::InvalidArgument("blocks and c_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn block_width(&self) -> usize {
        KERNEL_SIZES.len() * self.c_scale
    }

    pub fn fusion_channels(&self) -> usize {
        3 * self.block_width()
    }

    /// Input channels of cascade block `l` (zero-based).
    pub fn block_input_channels(&self, l: usize) -> usize {
        self.fusion_channels() + l * self.block_width()
    }

    pub fn head_input_channels(&self) -> usize {
        self.block_input_channels(self.blocks)
    }
}

/// Parallel 3x3/5x5/7x7 convolutions, each followed by ReLU, concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiScaleBlock<T = f32> {
    pub convs: [ConvParams<T>; 3],
}

impl<T: Scalar> MultiScaleBlock<T> {
    fn zeros(in_channels: usize, c_scale: usize) -> Self {
        Self {
            convs: KERNEL_SIZES.map(|k| ConvParams::zeros(c_scale, in_channels, k)),
        }
    }

    fn he_normal(in_channels: usize, c_scale: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            convs: KERNEL_SIZES.map(|k| ConvParams::he_normal(c_scale, in_channels, k, rng)),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.convs[0].in_channels()
    }

    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let outs = self
            .convs
            .iter()
            .map(|p| conv2d_forward(x, p).map(|y| relu_forward(&y)))
            .collect::<Result<Vec<_>>>()?;
        concat_channels(&[&outs[0], &outs[1], &outs[2]])
    }

    /// `out` is the value returned by [`forward`](Self::forward) on `x`.
    fn backward(
        &self,
        x: &Tensor4<T>,
        out: &Tensor4<T>,
        grad_out: &Tensor4<T>,
        want_input: bool,
    ) -> Result<(Option<Tensor4<T>>, MultiScaleBlock<T>)> {
        let sizes: Vec<usize> = self.convs.iter().map(|p| p.out_channels()).collect();
        let outs = split_channels(out, &sizes)?;
        let grads = split_channels(grad_out, &sizes)?;
        let mut grad_x: Option<Tensor4<T>> = None;
        let mut params = Vec::with_capacity(3);
        for ((conv, y), g) in self.convs.iter().zip(&outs).zip(&grads) {
            let g = relu_backward(y, g)?;
            let cg = conv2d_backward_impl(x, conv, &g, want_input)?;
            if let Some(gi) = cg.input {
                match grad_x.as_mut() {
                    Some(acc) => acc.add_assign(&gi)?,
                    None => grad_x = Some(gi),
                }
            }
            params.push(cg.params);
        }
        let convs: [ConvParams<T>; 3] = params.try_into().expect("three convolutions");
        Ok((grad_x, MultiScaleBlock { convs }))
    }
}

/// Batched network input.
#[derive(Debug, Clone, PartialEq)]
pub struct SsgnInput<T = f32> {
    /// `(N, 1, H, W)` noisy band.
    pub band: Tensor4<T>,
    /// `(N, 2, H, W)` spatial gradients `g_x`, `g_y`.
    pub spatial: Tensor4<T>,
    /// `(N, K, H, W)` spectral gradients.
    pub spectral: Tensor4<T>,
}

impl<T: Scalar> SsgnInput<T> {
    pub fn from_stacks(stacks: &[GradientStack]) -> Result<Self> {
        let first = stacks
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
        let (h, w) = first.dims();
        let k = first.adjacent_bands();
        let n = stacks.len();
        let mut band = Vec::with_capacity(n * h * w);
        let mut spatial = Vec::with_capacity(2 * n * h * w);
        let mut spectral = Vec::with_capacity(k * n * h * w);
        let conv = |b: &Band| b.data().iter().map(|&v| T::from_f64(v as f64)).collect::<Vec<_>>();
        for s in stacks {
            if s.dims() != (h, w) || s.adjacent_bands() != k {
                return Err(Error::ShapeMismatch(format!(
                    "stack {:?} with {} planes does not match {:?} with {k}",
                    s.dims(),
                    s.adjacent_bands(),
                    (h, w)
                )));
            }
            band.extend(conv(&s.y_k));
            spatial.extend(conv(&s.g_x));
            spatial.extend(conv(&s.g_y));
            for plane in &s.g_z {
                spectral.extend(conv(plane));
            }
        }
        Ok(Self {
            band: Tensor4::from_vec([n, 1, h, w], band)?,
            spatial: Tensor4::from_vec([n, 2, h, w], spatial)?,
            spectral: Tensor4::from_vec([n, k, h, w], spectral)?,
        })
    }

    pub fn batch(&self) -> usize {
        self.band.batch()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsgnOutput<T = f32> {
    /// `(N, 1, H, W)` estimated noise of the band.
    pub residual: Tensor4<T>,
    /// `(N, K, H, W)` estimated clean spectral gradients.
    pub spectral: Tensor4<T>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f32> {
    branch_outputs: [Tensor4<T>; 3],
    fusion: Tensor4<T>,
    block_inputs: Vec<Tensor4<T>>,
    block_outputs: Vec<Tensor4<T>>,
    head_input: Tensor4<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// On/off state of every ReLU unit, branches first, then cascade blocks.
    /// Two parameter settings with equal patterns lie on the same linear
    /// piece of the network.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.branch_outputs
            .iter()
            .chain(&self.block_outputs)
            .flat_map(|t| t.data().iter().map(|&v| v > T::zero()))
            .collect()
    }
}

/// Network parameters. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct SsgnModel<T = f32> {
    pub arch: SsgnArch,
    pub branch_band: MultiScaleBlock<T>,
    pub branch_spatial: MultiScaleBlock<T>,
    pub branch_spectral: MultiScaleBlock<T>,
    pub blocks: Vec<MultiScaleBlock<T>>,
    pub head_residual: ConvParams<T>,
    pub head_spectral: ConvParams<T>,
}

impl<T: Scalar> SsgnModel<T> {
    /// All weights and biases zero.
    pub fn zeros(arch: SsgnArch) -> Result<Self> {
        arch.validate()?;
        let c = arch.c_scale;
        Ok(Self {
            arch,
            branch_band: MultiScaleBlock::zeros(1, c),
            branch_spatial: MultiScaleBlock::zeros(2, c),
            branch_spectral: MultiScaleBlock::zeros(arch.adjacent_bands, c),
            blocks: (0..arch.blocks)
                .map(|l| MultiScaleBlock::zeros(arch.block_input_channels(l), c))
                .collect(),
            head_residual: ConvParams::zeros(1, arch.head_input_channels(), HEAD_KERNEL),
            head_spectral: ConvParams::zeros(arch.adjacent_bands, arch.head_input_channels(), HEAD_KERNEL),
        })
    }

    /// He-normal weights and zero biases, drawn in canonical parameter order
    /// from a generator seeded with `seed`.
    pub fn init(arch: SsgnArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = arch.c_scale;
        let branch_band = MultiScaleBlock::he_normal(1, c, &mut rng);
        let branch_spatial = MultiScaleBlock::he_normal(2, c, &mut rng);
        let branch_spectral = MultiScaleBlock::he_normal(arch.adjacent_bands, c, &mut rng);
        let blocks = (0..arch.blocks)
            .map(|l| MultiScaleBlock::he_normal(arch.block_input_channels(l), c, &mut rng))
            .collect();
        let head_residual = ConvParams::he_normal(1, arch.head_input_channels(), HEAD_KERNEL, &mut rng);
        let head_spectral =
            ConvParams::he_normal(arch.adjacent_bands, arch.head_input_channels(), HEAD_KERNEL, &mut rng);
        Ok(Self {
            arch,
            branch_band,
            branch_spatial,
            branch_spectral,
            blocks,
            head_residual,
            head_spectral,
        })
    }

    /// Every convolution in canonical order: the three branches, the cascade
    /// blocks (each 3x3, 5x5, 7x7), then the residual and spectral heads.
    pub fn convs(&self) -> Vec<&ConvParams<T>> {
        let mut out: Vec<&ConvParams<T>> = Vec::new();
        for block in [&self.branch_band, &self.branch_spatial, &self.branch_spectral]
            .into_iter()
            .chain(&self.blocks)
        {
            out.extend(block.convs.iter());
        }
        out.push(&self.head_residual);
        out.push(&self.head_spectral);
        out
    }

    pub fn convs_mut(&mut self) -> Vec<&mut ConvParams<T>> {
        let mut out: Vec<&mut ConvParams<T>> = Vec::new();
        for block in [&mut self.branch_band, &mut self.branch_spatial, &mut self.branch_spectral]
            .into_iter()
            .chain(self.blocks.iter_mut())
        {
            out.extend(block.convs.iter_mut());
        }
        out.push(&mut self.head_residual);
        out.push(&mut self.head_spectral);
        out
    }

    /// Parameter tensors in canonical order; each convolution contributes
    /// its kernel followed by its bias.
    pub fn param_slices(&self) -> Vec<&[T]> {
        self.convs()
            .into_iter()
            .flat_map(|p| [p.kernel.data(), p.bias.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.convs_mut()
            .into_iter()
            .flat_map(|p| {
                let ConvParams { kernel, bias } = p;
                [kernel.data_mut(), bias.as_mut_slice()]
            })
            .collect()
    }

    /// Shapes matching [`param_slices`](Self::param_slices); biases are `(out, 1, 1, 1)`.
    pub fn param_shapes(&self) -> Vec<[usize; 4]> {
        self.convs()
            .into_iter()
            .flat_map(|p| [p.kernel.dims(), [p.out_channels(), 1, 1, 1]])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<T> {
        self.param_slices().concat()
    }

    pub fn set_flat_params(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for slice in self.param_slices_mut() {
            slice.copy_from_slice(&values[offset..offset + slice.len()]);
            offset += slice.len();
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> SsgnModel<U> {
        let block = |b: &MultiScaleBlock<T>| MultiScaleBlock {
            convs: [b.convs[0].cast(), b.convs[1].cast(), b.convs[2].cast()],
        };
        SsgnModel {
            arch: self.arch,
            branch_band: block(&self.branch_band),
            branch_spatial: block(&self.branch_spatial),
            branch_spectral: block(&self.branch_spectral),
            blocks: self.blocks.iter().map(block).collect(),
            head_residual: self.head_residual.cast(),
            head_spectral: self.head_spectral.cast(),
        }
    }

    fn check_input(&self, input: &SsgnInput<T>) -> Result<()> {
        let [n, c_band, h, w] = input.band.dims();
        let expect = [
            (&input.band, 1, "band"),
            (&input.spatial, 2, "spatial"),
            (&input.spectral, self.arch.adjacent_bands, "spectral"),
        ];
        for (t, channels, name) in expect {
            let [tn, tc, th, tw] = t.dims();
            if tc != channels || (tn, th, tw) != (n, h, w) {
                return Err(Error::ArchMismatch(format!(
                    "{name} input {:?}, expected {:?}",
                    t.dims(),
                    [n, channels, h, w]
                )));
            }
        }
        debug_assert_eq!(c_band, 1);
        Ok(())
    }

    pub fn forward(&self, input: &SsgnInput<T>) -> Result<SsgnOutput<T>> {
        self.forward_train(input).map(|(out, _)| out)
    }

    /// Forward pass that also returns the activations needed by [`backward`](Self::backward).
    pub fn forward_train(&self, input: &SsgnInput<T>) -> Result<(SsgnOutput<T>, ForwardCache<T>)> {
        self.check_input(input)?;
        let branch_outputs = [
            self.branch_band.forward(&input.band)?,
            self.branch_spatial.forward(&input.spatial)?,
            self.branch_spectral.forward(&input.spectral)?,
        ];
        let fusion = concat_channels(&[&branch_outputs[0], &branch_outputs[1], &branch_outputs[2]])?;
        let mut block_inputs = Vec::with_capacity(self.blocks.len());
        let mut block_outputs: Vec<Tensor4<T>> = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let x = {
                let mut parts = vec![&fusion];
                parts.extend(block_outputs.iter());
                concat_channels(&parts)?
            };
            let y = block.forward(&x)?;
            block_inputs.push(x);
            block_outputs.push(y);
        }
        let head_input = {
            let mut parts = vec![&fusion];
            parts.extend(block_outputs.iter());
            concat_channels(&parts)?
        };
        let output = SsgnOutput {
            residual: conv2d_forward(&head_input, &self.head_residual)?,
            spectral: conv2d_forward(&head_input, &self.head_spectral)?,
        };
        Ok((
            output,
            ForwardCache {
                branch_outputs,
                fusion,
                block_inputs,
                block_outputs,
                head_input,
            },
        ))
    }

    /// Parameter gradients given the loss gradients of both heads.
    pub fn backward(
        &self,
        input: &SsgnInput<T>,
        cache: &ForwardCache<T>,
        grad_residual: &Tensor4<T>,
        grad_spectral: &Tensor4<T>,
    ) -> Result<SsgnModel<T>> {
        let arch = self.arch;
        let width = arch.block_width();

        let res = conv2d_backward_impl(&cache.head_input, &self.head_residual, grad_residual, true)?;
        let spec = conv2d_backward_impl(&cache.head_input, &self.head_spectral, grad_spectral, true)?;
        let mut grad_head = res.input.expect("input gradient requested");
        grad_head.add_assign(&spec.input.expect("input gradient requested"))?;

        // Gradient accumulators for the fusion map and every block output.
        let mut sizes = vec![arch.fusion_channels()];
        sizes.extend(std::iter::repeat_n(width, arch.blocks));
        let mut feature_grads = split_channels(&grad_head, &sizes)?;

        let mut block_grads = Vec::with_capacity(arch.blocks);
        for l in (0..arch.blocks).rev() {
            let (grad_in, params) = self.blocks[l].backward(
                &cache.block_inputs[l],
                &cache.block_outputs[l],
                &feature_grads[l + 1],
                true,
            )?;
            let parts = split_channels(&grad_in.expect("input gradient requested"), &sizes[..l + 1])?;
            for (acc, part) in feature_grads.iter_mut().zip(&parts) {
                acc.add_assign(part)?;
            }
            block_grads.push(params);
        }
        block_grads.reverse();

        let branch_grads = split_channels(&feature_grads[0], &[width, width, width])?;
        let branches = [
            (&self.branch_band, &input.band),
            (&self.branch_spatial, &input.spatial),
            (&self.branch_spectral, &input.spectral),
        ];
        let mut branch_params = Vec::with_capacity(3);
        for (((block, x), out), g) in branches.iter().zip(&cache.branch_outputs).zip(&branch_grads) {
            branch_params.push(block.backward(x, out, g, false)?.1);
        }
        let [branch_band, branch_spatial, branch_spectral]: [MultiScaleBlock<T>; 3] =
            branch_params.try_into().expect("three branches");
        debug_assert_eq!(cache.fusion.channels(), arch.fusion_channels());

        Ok(SsgnModel {
            arch,
            branch_band,
            branch_spatial,
            branch_spectral,
            blocks: block_grads,
            head_residual: res.params,
            head_spectral: spec.params,
        })
    }
}

/// `clamp(y_k - residual, 0, 1)`.
pub fn reconstruct(y_k: &Band, residual: &Band) -> Result<Band> {
    if y_k.dims() != residual.dims() {
        return Err(Error::DimensionMismatch(format!(
            "band {:?} vs residual {:?}",
            y_k.dims(),
            residual.dims()
        )));
    }
    let data = y_k
        .data()
        .iter()
        .zip(residual.data())
        .map(|(&y, &r)| (y - r).clamp(0.0, 1.0))
        .collect();
    Band::new(y_k.rows(), y_k.cols(), data)
}
