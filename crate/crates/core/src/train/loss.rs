//! The weighted spatial/spectral training loss.

use crate::tensor::{Scalar, Tensor4};
use crate::{Error, Result};

/// Loss value split into its weighted parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    /// `(1 - alpha) * spatial + alpha * spectral`.
    pub total: f64,
    /// `(1/2T) * sum ||res - (y - x)||^2`.
    pub spatial: f64,
    /// `(1/2T) * sum ||phi - g_z(x)||^2`.
    pub spectral: f64,
}

#[derive(Debug, Clone)]
pub struct LossOutput<T = f32> {
    pub parts: LossParts,
    pub grad_residual: Tensor4<T>,
    pub grad_spectral: Tensor4<T>,
}

fn half_sq_and_grad<T: Scalar>(pred: &Tensor4<T>, target: &Tensor4<T>, scale: f64) -> (f64, Tensor4<T>) {
    let mut grad = pred.clone();
    let s = T::from_f64(scale);
    let mut sum = 0.0f64;
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        sum += d.as_f64() * d.as_f64();
        *g = s * d;
    }
    (sum, grad)
}

/// Loss over a batch of `T` samples together with its exact gradients with
/// respect to both network heads.
pub fn spatial_spectral_loss<T: Scalar>(
    residual: &Tensor4<T>,
    spectral: &Tensor4<T>,
    residual_target: &Tensor4<T>,
    spectral_target: &Tensor4<T>,
    alpha: f64,
) -> Result<LossOutput<T>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    residual.check_same_shape(residual_target, "residual loss")?;
    spectral.check_same_shape(spectral_target, "spectral loss")?;
    let t = residual.batch();
    if spectral.batch() != t {
        return Err(Error::ShapeMismatch(format!(
            "residual batch {t} vs spectral batch {}",
            spectral.batch()
        )));
    }
    let n = t as f64;
    let (sq_res, grad_residual) = half_sq_and_grad(residual, residual_target, (1.0 - alpha) / n);
    let (sq_spec, grad_spectral) = half_sq_and_grad(spectral, spectral_target, alpha / n);
    let spatial = sq_res / (2.0 * n);
    let spectral = sq_spec / (2.0 * n);
    Ok(LossOutput {
        parts: LossParts {
            total: (1.0 - alpha) * spatial + alpha * spectral,
            spatial,
            spectral,
        },
        grad_residual,
        grad_spectral,
    })
}
