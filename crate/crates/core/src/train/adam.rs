//! Adam with bias correction and a step-decay learning-rate schedule.

use crate::model::SsgnModel;
use crate::tensor::Scalar;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Per-parameter first and second moments plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state for parameter tensors of the given lengths.
    pub fn new(lengths: impl IntoIterator<Item = usize>) -> Self {
        let m: Vec<Vec<T>> = lengths.into_iter().map(|n| vec![T::zero(); n]).collect();
        Self {
            v: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn for_model(model: &SsgnModel<T>) -> Self {
        Self::new(model.param_slices().iter().map(|s| s.len()))
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.m.iter().map(Vec::len).collect()
    }
}

/// One Adam update of every tensor in `params`.
///
/// Gradients are checked for finiteness before anything is modified, so a
/// failed step leaves both the parameters and the state untouched.
pub fn adam_step<T: Scalar>(params: &mut [&mut [T]], grads: &[&[T]], state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameter tensors, {} gradients, {} moment tensors",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, ((p, g), m)) in params.iter().zip(grads).zip(&state.m).enumerate() {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::ShapeMismatch(format!(
                "tensor {i}: {} parameters, {} gradients, {} moments",
                p.len(),
                g.len(),
                m.len()
            )));
        }
        if let Some(j) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of tensor {i} at element {j}")));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let b1 = T::from_f64(BETA1);
    let b2 = T::from_f64(BETA2);
    let c1 = T::from_f64(1.0 - BETA1.powi(t));
    let c2 = T::from_f64(1.0 - BETA2.powi(t));
    let lr = T::from_f64(lr);
    let eps = T::from_f64(EPSILON);
    let one = T::one();
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for (((w, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Applies [`adam_step`] to every parameter of `model` using `grads`, a
/// model-shaped gradient container.
pub fn adam_step_model<T: Scalar>(
    model: &mut SsgnModel<T>,
    grads: &SsgnModel<T>,
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if model.arch != grads.arch {
        return Err(Error::ArchMismatch(format!("{:?} vs {:?}", model.arch, grads.arch)));
    }
    let grads = grads.param_slices();
    let mut params = model.param_slices_mut();
    adam_step(&mut params, &grads, state, lr)
}

/// `lr0 * decay^floor(epoch / every)`.
pub fn lr_at_epoch(lr0: f64, decay: f64, every: usize, epoch: usize) -> f64 {
    lr0 * decay.powi((epoch / every.max(1)) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_scalar(w: &mut f64, g: f64, state: &mut AdamState<f64>, lr: f64) {
        let mut p = [*w];
        adam_step(&mut [&mut p[..]], &[&[g][..]], state, lr).unwrap();
        *w = p[0];
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut state = AdamState::<f64>::new([3]);
        let mut p = [1.0, -2.0, 0.5];
        adam_step(&mut [&mut p[..]], &[&[0.0; 3][..]], &mut state, 0.1).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [1e-3, 0.5, 7.0, -300.0] {
            let mut state = AdamState::<f64>::new([1]);
            let mut w = 0.0;
            step_scalar(&mut w, g, &mut state, 0.01);
            let expected = 0.01 * g.abs() / (g.abs() + EPSILON);
            assert!((w.abs() - expected).abs() < 1e-12, "g {g}: {w}");
            assert!((w + 0.01 * g.signum()).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_scale_does_not_change_first_update() {
        let mut a = AdamState::<f64>::new([1]);
        let mut b = AdamState::<f64>::new([1]);
        let (mut wa, mut wb) = (1.0, 1.0);
        step_scalar(&mut wa, 0.3, &mut a, 0.05);
        step_scalar(&mut wb, 30.0, &mut b, 0.05);
        assert!((wa - wb).abs() < 1e-6);
    }

    #[test]
    fn quadratic_converges() {
        // Straight-line simulation of Adam on f(w) = w^2 / 2 as the oracle.
        let (mut m, mut v, mut w_ref) = (0.0f64, 0.0f64, 1.0f64);
        let mut state = AdamState::<f64>::new([1]);
        let mut w = 1.0;
        let mut history = vec![w];
        for t in 1..=100 {
            let g = w_ref;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            w_ref -= 0.1 * mh / (vh.sqrt() + 1e-8);

            let g = w;
            step_scalar(&mut w, g, &mut state, 0.1);
            assert!((w - w_ref).abs() < 1e-12);
            history.push(w);
        }
        assert!(w.abs() < 0.1, "final w {w}");
        for pair in history[..6].windows(2) {
            assert!(pair[1].abs() < pair[0].abs());
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_side_effects() {
        let mut state = AdamState::<f32>::new([2]);
        let mut p = [1.0f32, 2.0];
        let err = adam_step(&mut [&mut p[..]], &[&[0.1, f32::NAN][..]], &mut state, 0.1);
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert_eq!(p, [1.0, 2.0]);
        assert_eq!(state.t, 0);
        assert!(adam_step(&mut [&mut p[..]], &[&[0.1][..]], &mut state, 0.1).is_err());
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(lr_at_epoch(0.001, 0.5, 10, 0), 0.001);
        assert_eq!(lr_at_epoch(0.001, 0.5, 10, 9), 0.001);
        assert_eq!(lr_at_epoch(0.001, 0.5, 10, 10), 0.0005);
        assert_eq!(lr_at_epoch(0.001, 0.5, 10, 25), 0.00025);
        let mut prev = f64::INFINITY;
        for e in 0..100 {
            let lr = lr_at_epoch(0.01, 0.7, 3, e);
            assert!(lr <= prev);
            prev = lr;
        }
    }
}
