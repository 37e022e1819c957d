//! Loss, optimizer, batch sampling and the training loop.

mod adam;
mod config;
mod loss;
mod sampler;
mod trainer;

pub use adam::{adam_step, adam_step_model, lr_at_epoch, AdamState, BETA1, BETA2, EPSILON};
pub use config::{TrainConfig, CONFIG_KEYS};
pub use loss::{spatial_spectral_loss, LossOutput, LossParts};
pub use sampler::{sample_batch, PatchRef, Sampler, TrainBatch, TrainSample};
pub use trainer::{batch_gradients, resume, train, train_with_progress, EpochLog, TrainLog, TrainOutcome};
