//! Whole-cube denoising: every band goes through the network once, at full
//! resolution.

use crate::cube::{Band, HsiCube};
use crate::gradient::build_gradient_stack;
use crate::model::{reconstruct, SsgnInput, SsgnModel};
use crate::{Error, Result};

/// Denoises band `k` of a normalized cube; the result is clamped to `[0, 1]`.
pub fn denoise_band(model: &SsgnModel<f32>, normalized: &HsiCube, k: usize) -> Result<Band> {
    let stack = build_gradient_stack(normalized, k, model.arch.adjacent_bands)?;
    let input = SsgnInput::<f32>::from_stacks(std::slice::from_ref(&stack))?;
    let out = model.forward(&input)?;
    let residual = Band::new(stack.y_k.rows(), stack.y_k.cols(), out.residual.into_vec())?;
    reconstruct(&stack.y_k, &residual)
}

/// Denoises every band and returns the cube in its original units.
///
/// A cube carrying normalization metadata is taken to be normalized already
/// and is mapped back with its stored ranges; any other cube is normalized
/// per band first. `adjacent_bands`, when given, must equal the model's `K`.
pub fn denoise_cube(model: &SsgnModel<f32>, cube: &HsiCube, adjacent_bands: Option<usize>) -> Result<HsiCube> {
    if let Some(k) = adjacent_bands {
        if k != model.arch.adjacent_bands {
            return Err(Error::ArchMismatch(format!(
                "requested K = {k}, checkpoint was trained with K = {}",
                model.arch.adjacent_bands
            )));
        }
    }
    let normalized = if cube.is_normalized() {
        cube.clone()
    } else {
        cube.normalize_per_band()?
    };
    let mut out = normalized.clone();
    for k in 0..normalized.bands() {
        let band = denoise_band(model, &normalized, k)?;
        out.set_band(k, &band)?;
    }
    out.denormalize_per_band()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SsgnArch;
    use crate::synthetic::smooth_cube;

    #[test]
    fn zero_model_is_identity() {
        let model = SsgnModel::<f32>::zeros(SsgnArch::DESK).unwrap();
        let raw = smooth_cube(13, 17, 7, 1);
        let out = denoise_cube(&model, &raw, None).unwrap();
        assert_eq!(out.dims(), raw.dims());
        assert!(!out.is_normalized());
        for (a, b) in out.data().iter().zip(raw.data()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn normalized_input_keeps_its_ranges() {
        let model = SsgnModel::<f32>::zeros(SsgnArch::DESK).unwrap();
        let raw = smooth_cube(9, 9, 6, 2);
        let normalized = raw.normalize_per_band().unwrap();
        let out = denoise_cube(&model, &normalized, Some(4)).unwrap();
        assert_eq!(out, normalized.denormalize_per_band().unwrap());
    }

    #[test]
    fn window_mismatch_is_an_error() {
        let model = SsgnModel::<f32>::zeros(SsgnArch::DESK).unwrap();
        let raw = smooth_cube(9, 9, 6, 2);
        assert!(matches!(denoise_cube(&model, &raw, Some(6)), Err(Error::ArchMismatch(_))));
        let thin = smooth_cube(9, 9, 4, 2);
        assert!(denoise_cube(&model, &thin, None).is_err());
    }

    #[test]
    fn trained_weights_keep_dims_and_range() {
        let model = SsgnModel::<f32>::init(SsgnArch::DESK, 3).unwrap();
        let cube = smooth_cube(11, 8, 6, 5).normalize_per_band().unwrap();
        let band = denoise_band(&model, &cube, 5).unwrap();
        assert_eq!(band.dims(), (11, 8));
        assert!(band.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
