//! The epoch loop.

use std::fmt::Write as _;
use std::thread;

use crate::cube::HsiCube;
use crate::model::{SsgnInput, SsgnModel};
use crate::tensor::{Scalar, Tensor4};
use crate::train::{
    adam_step_model, lr_at_epoch, spatial_spectral_loss, AdamState, LossParts, Sampler, TrainConfig,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean of the batch losses of the epoch.
    pub loss: f64,
}

impl EpochLog {
    pub fn to_line(&self) -> String {
        format!("epoch {} lr {} loss {}", self.epoch, self.lr, self.loss)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Total loss of every batch in training order.
    pub batch_losses: Vec<f64>,
}

impl TrainLog {
    /// One `epoch <n> lr <v> loss <v>` line per epoch.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let _ = writeln!(out, "{}", e.to_line());
        }
        out
    }

    /// Trailing moving average of the batch losses; entry `i` averages
    /// batches `i + 1 - window ..= i`. Empty when there are fewer than
    /// `window` batches.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        if window == 0 || self.batch_losses.len() < window {
            return Vec::new();
        }
        self.batch_losses
            .windows(window)
            .map(|w| w.iter().sum::<f64>() / window as f64)
            .collect()
    }
}

/// Loss and parameter gradients for one batch.
pub fn batch_gradients<T: Scalar>(
    model: &SsgnModel<T>,
    input: &SsgnInput<T>,
    residual_target: &Tensor4<T>,
    spectral_target: &Tensor4<T>,
    alpha: f64,
) -> Result<(LossParts, SsgnModel<T>)> {
    let (out, cache) = model.forward_train(input)?;
    let loss = spatial_spectral_loss(&out.residual, &out.spectral, residual_target, spectral_target, alpha)?;
    let grads = model.backward(input, &cache, &loss.grad_residual, &loss.grad_spectral)?;
    Ok((loss.parts, grads))
}

fn add_grads<T: Scalar>(acc: &mut SsgnModel<T>, other: &SsgnModel<T>) {
    for (a, b) in acc.param_slices_mut().into_iter().zip(other.param_slices()) {
        for (x, &y) in a.iter_mut().zip(b) {
            *x = *x + y;
        }
    }
}

fn slice_input<T: Scalar>(input: &SsgnInput<T>, start: usize, end: usize) -> Result<SsgnInput<T>> {
    Ok(SsgnInput {
        band: input.band.slice_batch(start, end)?,
        spatial: input.spatial.slice_batch(start, end)?,
        spectral: input.spectral.slice_batch(start, end)?,
    })
}

/// Splits the batch across worker threads. Each chunk's loss is weighted by
/// its share of the batch so the sum matches the whole-batch loss.
fn parallel_gradients(
    model: &SsgnModel<f32>,
    input: &SsgnInput<f32>,
    residual_target: &Tensor4<f32>,
    spectral_target: &Tensor4<f32>,
    alpha: f64,
) -> Result<(LossParts, SsgnModel<f32>)> {
    let n = input.batch();
    let workers = thread::available_parallelism().map_or(1, |w| w.get()).min(n);
    if workers <= 1 {
        return batch_gradients(model, input, residual_target, spectral_target, alpha);
    }
    let chunk = n.div_ceil(workers);
    let ranges: Vec<(usize, usize)> = (0..n).step_by(chunk).map(|s| (s, (s + chunk).min(n))).collect();
    let results: Vec<Result<(LossParts, SsgnModel<f32>, f64)>> = thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|&(s, e)| {
                scope.spawn(move || {
                    let part = slice_input(input, s, e)?;
                    let rt = residual_target.slice_batch(s, e)?;
                    let st = spectral_target.slice_batch(s, e)?;
                    let (loss, grads) = batch_gradients(model, &part, &rt, &st, alpha)?;
                    Ok((loss, grads, (e - s) as f64 / n as f64))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
    });

    let mut total = LossParts {
        total: 0.0,
        spatial: 0.0,
        spectral: 0.0,
    };
    let mut acc: Option<SsgnModel<f32>> = None;
    for r in results {
        let (loss, mut grads, weight) = r?;
        total.total += weight * loss.total;
        total.spatial += weight * loss.spatial;
        total.spectral += weight * loss.spectral;
        let w = weight as f32;
        for s in grads.param_slices_mut() {
            s.iter_mut().for_each(|v| *v *= w);
        }
        match acc.as_mut() {
            Some(a) => add_grads(a, &grads),
            None => acc = Some(grads),
        }
    }
    Ok((total, acc.expect("at least one chunk")))
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SsgnModel<f32>,
    pub adam: AdamState<f32>,
    pub log: TrainLog,
}

/// Trains a freshly initialized model.
pub fn train(cubes: &[HsiCube], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(cubes, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress(
    cubes: &[HsiCube],
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    let model = SsgnModel::init(config.arch, config.seed)?;
    let adam = AdamState::for_model(&model);
    resume(cubes, config, model, adam, 0, on_epoch)
}

/// Continues training `model` from `first_epoch` up to `config.epochs`.
pub fn resume(
    cubes: &[HsiCube],
    config: &TrainConfig,
    mut model: SsgnModel<f32>,
    mut adam: AdamState<f32>,
    first_epoch: usize,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if model.arch != config.arch {
        return Err(Error::ArchMismatch(format!(
            "model {:?} vs config {:?}",
            model.arch, config.arch
        )));
    }
    let mut log = TrainLog::default();
    if first_epoch >= config.epochs {
        return Ok(TrainOutcome { model, adam, log });
    }
    let sampler = Sampler::new(cubes, config)?;
    for epoch in first_epoch..config.epochs {
        let lr = lr_at_epoch(config.lr0, config.lr_decay, config.decay_every, epoch);
        let order = sampler.epoch_order(epoch);
        let mut sum = 0.0;
        let batches = sampler.batches_per_epoch();
        for index in 0..batches {
            let batch = sampler.batch_from_order(&order, epoch, index)?;
            let (input, rt, st) = batch.tensors::<f32>()?;
            let (loss, grads) = if config.deterministic_reduction {
                batch_gradients(&model, &input, &rt, &st, config.alpha)?
            } else {
                parallel_gradients(&model, &input, &rt, &st, config.alpha)?
            };
            if !loss.total.is_finite() {
                return Err(Error::NonFinite(format!("loss at epoch {epoch}, batch {index}")));
            }
            adam_step_model(&mut model, &grads, &mut adam, lr)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}, batch {index}: {e}")))?;
            log.batch_losses.push(loss.total);
            sum += loss.total;
        }
        let entry = EpochLog {
            epoch,
            lr,
            loss: sum / batches as f64,
        };
        on_epoch(&entry);
        log.epochs.push(entry);
    }
    Ok(TrainOutcome { model, adam, log })
}
