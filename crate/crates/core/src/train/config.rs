//! Training configuration, named profiles and the `key = value` file format.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::model::SsgnArch;
use crate::noise::{NoiseCase, NoiseSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub arch: SsgnArch,
    /// Weight of the spectral term in the loss.
    pub alpha: f64,
    pub lr0: f64,
    pub lr_decay: f64,
    /// Epochs between learning-rate decays.
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub patch: usize,
    pub stride: usize,
    /// Noise template; its seed is replaced per epoch and patch.
    pub noise: NoiseSpec,
    pub seed: u64,
    pub augmentation: bool,
    /// Reduce per-sample gradients sequentially in batch order.
    pub deterministic_reduction: bool,
}

/// Keys accepted in a config file, in the order [`TrainConfig::to_text`] writes them.
pub const CONFIG_KEYS: &[&str] = &[
    "profile",
    "adjacent_bands",
    "blocks",
    "c_scale",
    "alpha",
    "lr0",
    "lr_decay",
    "decay_every",
    "epochs",
    "batch_size",
    "patch",
    "stride",
    "seed",
    "augmentation",
    "deterministic_reduction",
    "noise_case",
    "noise_snr",
    "sigma_low",
    "sigma_high",
    "stripe_bands",
    "stripe_rows_low",
    "stripe_rows_high",
    "deadline_bands",
    "deadline_width_min",
    "deadline_width_max",
];

impl TrainConfig {
    /// Small network and short schedule that finish on a laptop CPU: about
    /// 2000 batches on a single 96x96x16 cube.
    pub fn desk() -> Self {
        let mut noise = NoiseSpec::new(NoiseCase::Mixture, 0);
        noise.stripe_band_count = 2;
        noise.deadline_band_count = 2;
        Self {
            arch: SsgnArch::DESK,
            alpha: 0.001,
            lr0: 0.001,
            lr_decay: 0.5,
            decay_every: 40,
            epochs: 110,
            batch_size: 8,
            patch: 25,
            stride: 25,
            noise,
            seed: 0,
            augmentation: true,
            deterministic_reduction: true,
        }
    }

    /// Full-size settings (`K = 24`, five blocks, 200 epochs). Far too slow
    /// for a CPU; kept for reference runs.
    pub fn full() -> Self {
        Self {
            arch: SsgnArch::FULL,
            decay_every: 10,
            epochs: 200,
            batch_size: 64,
            noise: NoiseSpec::new(NoiseCase::Mixture, 0),
            ..Self::desk()
        }
    }

    pub fn from_profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(Error::InvalidArgument(format!("unknown profile {other:?} (expected desk or full)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.noise.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidArgument(format!("lr_decay {} outside (0, 1]", self.lr_decay)));
        }
        for (name, v) in [
            ("decay_every", self.decay_every),
            ("batch_size", self.batch_size),
            ("patch", self.patch),
            ("stride", self.stride),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Parses a config file. A `profile` line selects the starting values
    /// wherever it appears; every other line overrides one field.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, &str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("unknown key {key:?}"),
                });
            }
            if entries.iter().any(|(_, k, _)| *k == key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate key {key:?}"),
                });
            }
            entries.push((line_no, key, value));
        }

        let mut config = match entries.iter().find(|(_, k, _)| *k == "profile") {
            Some(&(line, _, v)) => Self::from_profile(v).map_err(|e| Error::Config {
                line,
                message: e.to_string(),
            })?,
            None => Self::desk(),
        };
        for &(line, key, value) in &entries {
            config.set(key, value).map_err(|message| Error::Config { line, message })?;
        }
        config.validate()?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value.parse().map_err(|_| format!("invalid value {value:?} for {key}"))
        }
        fn flag(key: &str, value: &str) -> std::result::Result<bool, String> {
            match value {
                "on" | "true" | "yes" | "1" => Ok(true),
                "off" | "false" | "no" | "0" => Ok(false),
                _ => Err(format!("invalid value {value:?} for {key} (expected on or off)")),
            }
        }
        match key {
            "profile" => {}
            "adjacent_bands" => self.arch.adjacent_bands = num(key, value)?,
            "blocks" => self.arch.blocks = num(key, value)?,
            "c_scale" => self.arch.c_scale = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "lr0" => self.lr0 = num(key, value)?,
            "lr_decay" => self.lr_decay = num(key, value)?,
            "decay_every" => self.decay_every = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "patch" => self.patch = num(key, value)?,
            "stride" => self.stride = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "augmentation" => self.augmentation = flag(key, value)?,
            "deterministic_reduction" => self.deterministic_reduction = flag(key, value)?,
            "noise_case" => self.noise.case = value.parse().map_err(|e: Error| e.to_string())?,
            "noise_snr" => {
                self.noise.target_snr_db = match value {
                    "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "sigma_low" => self.noise.gaussian_sigma_range.0 = num(key, value)?,
            "sigma_high" => self.noise.gaussian_sigma_range.1 = num(key, value)?,
            "stripe_bands" => self.noise.stripe_band_count = num(key, value)?,
            "stripe_rows_low" => self.noise.stripe_row_fraction_range.0 = num(key, value)?,
            "stripe_rows_high" => self.noise.stripe_row_fraction_range.1 = num(key, value)?,
            "deadline_bands" => self.noise.deadline_band_count = num(key, value)?,
            "deadline_width_min" => self.noise.deadline_width_range.0 = num(key, value)?,
            "deadline_width_max" => self.noise.deadline_width_range.1 = num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Renders every field; [`parse`](Self::parse) reads the result back unchanged.
    pub fn to_text(&self) -> String {
        let on = |b: bool| if b { "on" } else { "off" };
        let n = &self.noise;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("adjacent_bands", self.arch.adjacent_bands.to_string());
        line("blocks", self.arch.blocks.to_string());
        line("c_scale", self.arch.c_scale.to_string());
        line("alpha", self.alpha.to_string());
        line("lr0", self.lr0.to_string());
        line("lr_decay", self.lr_decay.to_string());
        line("decay_every", self.decay_every.to_string());
        line("epochs", self.epochs.to_string());
        line("batch_size", self.batch_size.to_string());
        line("patch", self.patch.to_string());
        line("stride", self.stride.to_string());
        line("seed", self.seed.to_string());
        line("augmentation", on(self.augmentation).into());
        line("deterministic_reduction", on(self.deterministic_reduction).into());
        line("noise_case", n.case.number().to_string());
        line("noise_snr", n.target_snr_db.map_or("none".into(), |v| v.to_string()));
        line("sigma_low", n.gaussian_sigma_range.0.to_string());
        line("sigma_high", n.gaussian_sigma_range.1.to_string());
        line("stripe_bands", n.stripe_band_count.to_string());
        line("stripe_rows_low", n.stripe_row_fraction_range.0.to_string());
        line("stripe_rows_high", n.stripe_row_fraction_range.1.to_string());
        line("deadline_bands", n.deadline_band_count.to_string());
        line("deadline_width_min", n.deadline_width_range.0.to_string());
        line("deadline_width_max", n.deadline_width_range.1.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        let desk = TrainConfig::desk();
        assert_eq!(desk.arch, SsgnArch::DESK);
        assert_eq!(desk.alpha, 0.001);
        assert_eq!((desk.lr0, desk.lr_decay, desk.decay_every), (0.001, 0.5, 40));
        let full = TrainConfig::full();
        assert_eq!((full.lr0, full.lr_decay, full.decay_every), (0.001, 0.5, 10));
        assert_eq!(full.arch, SsgnArch::FULL);
        assert_eq!(full.epochs, 200);
        assert_eq!((full.patch, full.stride), (25, 25));
        assert!(TrainConfig::from_profile("huge").is_err());
    }

    #[test]
    fn roundtrip_through_text() {
        let mut c = TrainConfig::full();
        c.alpha = 0.25;
        c.noise.target_snr_db = Some(18.0);
        c.augmentation = false;
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(TrainConfig::parse(&TrainConfig::desk().to_text()).unwrap(), TrainConfig::desk());
    }

    #[test]
    fn profile_applies_before_overrides() {
        let c = TrainConfig::parse("epochs = 3\n# comment\nprofile = full\n").unwrap();
        assert_eq!(c.epochs, 3);
        assert_eq!(c.arch, SsgnArch::FULL);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = TrainConfig::parse("alpha = 0.1\n\nlearning_rate = 3\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
        assert!(matches!(TrainConfig::parse("alpha 0.1"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(TrainConfig::parse("epochs = many"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(
            TrainConfig::parse("seed = 1\nseed = 2"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(TrainConfig::parse("alpha = 2").is_err());
        assert!(TrainConfig::parse("lr_decay = 0").is_err());
        assert!(TrainConfig::parse("adjacent_bands = 3").is_err());
    }
}
