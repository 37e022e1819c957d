//! Hyperspectral mixed-noise removal with a spatial-spectral gradient network.
//!
//! The crate covers the whole pipeline: cube storage and the `HSIC` file
//! format, spatial and spectral gradient extraction, mixed-noise simulation,
//! a small reverse-mode convolution engine, the network itself, training,
//! denoising and quality metrics.

pub mod augment;
pub mod checkpoint;
pub mod cube;
pub mod denoise;
mod error;
pub mod gradcheck;
pub mod gradient;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod ops;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, load_model, save_checkpoint, save_model};
pub use cube::{load_cube, save_cube, Band, HsiCube};
pub use denoise::{denoise_band, denoise_cube};
pub use error::{Error, Result};
pub use gradient::{build_gradient_stack, GradientStack};
pub use metrics::{evaluate, msa, psnr, ssim, MetricsReport};
pub use model::{reconstruct, SsgnArch, SsgnInput, SsgnModel, SsgnOutput};
pub use noise::{simulate_case, NoiseCase, NoiseManifest, NoiseSpec};
pub use tensor::{Scalar, Tensor4};
pub use train::{train, AdamState, TrainConfig, TrainLog};
