//! Seeded simulation of mixed hyperspectral degradations.
//!
//! Sparse components (stripes, then dead lines) are applied first and the
//! dense Gaussian component last. Every random draw comes from a ChaCha
//! stream derived from the spec seed and a fixed stream id, so results do not
//! depend on evaluation order. Noisy values are never clipped.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cube::HsiCube;
use crate::{Error, Result};

/// Reported SNR (and PSNR) when the two inputs are identical.
pub const DB_CAP: f64 = 99.0;

/// Band count the default sparse-noise band counts refer to.
const REFERENCE_BANDS: usize = 191;

const STREAM_STRIPES: u64 = 1;
const STREAM_DEAD_LINES: u64 = 2;
const STREAM_SIGMAS: u64 = 3;
const STREAM_GAUSSIAN_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCase {
    Gaussian,
    Stripe,
    GaussianStripe,
    GaussianDeadline,
    Mixture,
}

impl NoiseCase {
    /// Maps the simulation case number `1..=5` to its noise mix.
    pub fn from_number(n: u8) -> Result<Self> {
        Ok(match n {
            1 => Self::Gaussian,
            2 => Self::Stripe,
            3 => Self::GaussianStripe,
            4 => Self::GaussianDeadline,
            5 => Self::Mixture,
            _ => return Err(Error::InvalidArgument(format!("noise case must be 1..=5, got {n}"))),
        })
    }

    pub fn number(self) -> u8 {
        match self {
            Self::Gaussian => 1,
            Self::Stripe => 2,
            Self::GaussianStripe => 3,
            Self::GaussianDeadline => 4,
            Self::Mixture => 5,
        }
    }

    pub fn has_gaussian(self) -> bool {
        self != Self::Stripe
    }

    pub fn has_stripes(self) -> bool {
        matches!(self, Self::Stripe | Self::GaussianStripe | Self::Mixture)
    }

    pub fn has_dead_lines(self) -> bool {
        matches!(self, Self::GaussianDeadline | Self::Mixture)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Stripe => "stripe",
            Self::GaussianStripe => "gaussian_stripe",
            Self::GaussianDeadline => "gaussian_deadline",
            Self::Mixture => "mixture",
        }
    }
}

impl fmt::Display for NoiseCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "stripe" => Ok(Self::Stripe),
            "gaussian_stripe" => Ok(Self::GaussianStripe),
            "gaussian_deadline" => Ok(Self::GaussianDeadline),
            "mixture" => Ok(Self::Mixture),
            other => other
                .parse::<u8>()
                .map_err(|_| Error::InvalidArgument(format!("unknown noise case {other:?}")))
                .and_then(Self::from_number),
        }
    }
}

/// Parameters of one simulated degradation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub case: NoiseCase,
    pub target_snr_db: Option<f64>,
    /// Per-band Gaussian standard deviation is drawn uniformly from this range.
    pub gaussian_sigma_range: (f64, f64),
    pub stripe_band_count: usize,
    /// Fraction of rows striped in each selected band.
    pub stripe_row_fraction_range: (f64, f64),
    pub deadline_band_count: usize,
    /// Inclusive range of dead-line widths in columns.
    pub deadline_width_range: (usize, usize),
    pub seed: u64,
}

impl NoiseSpec {
    /// Defaults: sigma in (0.04, 0.16), 10 striped bands over 5-30% of rows,
    /// 20 dead-line bands of width 1-3, no SNR target.
    pub fn new(case: NoiseCase, seed: u64) -> Self {
        Self {
            case,
            target_snr_db: None,
            gaussian_sigma_range: (0.04, 0.16),
            stripe_band_count: 10,
            stripe_row_fraction_range: (0.05, 0.30),
            deadline_band_count: 20,
            deadline_width_range: (1, 3),
            seed,
        }
    }

    /// Rescales the default striped and dead-line band counts (10 and 20 out
    /// of 191 bands) to a cube with `bands` bands, keeping at least one each.
    pub fn scaled_to_bands(mut self, bands: usize) -> Self {
        let scale = |count: usize| ((count * bands) as f64 / REFERENCE_BANDS as f64).round().max(1.0) as usize;
        self.stripe_band_count = scale(10).min(bands);
        self.deadline_band_count = scale(20).min(bands);
        self
    }

    pub fn with_target_snr(mut self, db: f64) -> Self {
        self.target_snr_db = Some(db);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.gaussian_sigma_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma range ({lo}, {hi}) invalid")));
        }
        let (flo, fhi) = self.stripe_row_fraction_range;
        if !(flo > 0.0 && fhi < 1.0 && flo <= fhi) {
            return Err(Error::InvalidArgument(format!(
                "stripe row fraction range ({flo}, {fhi}) must lie in (0, 1)"
            )));
        }
        let (wlo, whi) = self.deadline_width_range;
        if wlo == 0 || wlo > whi {
            return Err(Error::InvalidArgument(format!("dead-line width range ({wlo}, {whi}) invalid")));
        }
        if let Some(db) = self.target_snr_db {
            if !db.is_finite() {
                return Err(Error::InvalidArgument("target SNR must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Rows of one band offset by plus or minus the band mean.
#[derive(Debug, Clone, PartialEq)]
pub struct StripeRecord {
    pub band: usize,
    pub mean: f32,
    pub added_rows: Vec<usize>,
    pub subtracted_rows: Vec<usize>,
}

/// `width` columns starting at `col` zeroed across band `band`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeadLine {
    pub band: usize,
    pub col: usize,
    pub width: usize,
}

/// Everything [`simulate_case`] drew, sufficient to rebuild the sparse component.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseManifest {
    pub case: NoiseCase,
    pub seed: u64,
    pub target_snr_db: Option<f64>,
    /// Factor applied to the drawn sigmas to meet the SNR target (1 without a target).
    pub gaussian_scale: f64,
    /// Effective per-band sigma after scaling; empty for cases without Gaussian noise.
    pub sigmas: Vec<f64>,
    pub stripes: Vec<StripeRecord>,
    pub dead_lines: Vec<DeadLine>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn draw_sigmas(bands: usize, range: (f64, f64), seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, STREAM_SIGMAS);
    (0..bands)
        .map(|_| range.0 + (range.1 - range.0) * rng.random::<f64>())
        .collect()
}

/// Zero-mean Gaussian field with standard deviation `sigmas[b]` on band `b`.
fn gaussian_field(cube: &HsiCube, sigmas: &[f64], seed: u64) -> Vec<f64> {
    let mut field = Vec::with_capacity(cube.data().len());
    for (b, &sigma) in sigmas.iter().enumerate() {
        let mut rng = stream(seed, STREAM_GAUSSIAN_BASE + b as u64);
        field.extend((0..cube.band_len()).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)));
    }
    field
}

fn check_band_count(count: usize, bands: usize, what: &str) -> Result<()> {
    if count > bands {
        Err(Error::InvalidArgument(format!("{count} {what} bands requested, cube has {bands}")))
    } else {
        Ok(())
    }
}

/// Adds per-band Gaussian noise; returns the noisy cube and the drawn sigmas.
pub fn add_gaussian(cube: &HsiCube, sigma_range: (f64, f64), seed: u64) -> Result<(HsiCube, Vec<f64>)> {
    if !(sigma_range.0 >= 0.0 && sigma_range.1 >= sigma_range.0) {
        return Err(Error::InvalidArgument(format!("sigma range {sigma_range:?} invalid")));
    }
    let sigmas = draw_sigmas(cube.bands(), sigma_range, seed);
    let field = gaussian_field(cube, &sigmas, seed);
    let mut noisy = cube.clone();
    for (v, n) in noisy.data_mut().iter_mut().zip(&field) {
        *v = (*v as f64 + n) as f32;
    }
    Ok((noisy, sigmas))
}

fn plan_stripes(cube: &HsiCube, band_count: usize, fraction_range: (f64, f64), seed: u64) -> Result<Vec<StripeRecord>> {
    check_band_count(band_count, cube.bands(), "striped")?;
    let mut rng = stream(seed, STREAM_STRIPES);
    let rows = cube.rows();
    let chosen = index::sample(&mut rng, cube.bands(), band_count).into_vec();
    Ok(chosen
        .into_iter()
        .map(|band| {
            let fraction = fraction_range.0 + (fraction_range.1 - fraction_range.0) * rng.random::<f64>();
            let count = ((fraction * rows as f64).round() as usize).clamp(1, rows);
            let mut picked = index::sample(&mut rng, rows, count).into_vec();
            let subtracted_rows = picked.split_off(count.div_ceil(2));
            let data = cube.band(band);
            let mean = (data.iter().map(|&v| v as f64).sum::<f64>() / data.len() as f64) as f32;
            StripeRecord {
                band,
                mean,
                added_rows: picked,
                subtracted_rows,
            }
        })
        .collect())
}

fn apply_stripes(cube: &mut HsiCube, records: &[StripeRecord]) {
    let cols = cube.cols();
    for rec in records {
        let band = cube.band_mut(rec.band);
        for &r in &rec.added_rows {
            band[r * cols..(r + 1) * cols].iter_mut().for_each(|v| *v += rec.mean);
        }
        for &r in &rec.subtracted_rows {
            band[r * cols..(r + 1) * cols].iter_mut().for_each(|v| *v -= rec.mean);
        }
    }
}

/// Offsets randomly chosen rows of `band_count` bands by plus or minus the band mean.
pub fn add_stripes(
    cube: &HsiCube,
    band_count: usize,
    row_fraction_range: (f64, f64),
    seed: u64,
) -> Result<(HsiCube, Vec<usize>)> {
    let records = plan_stripes(cube, band_count, row_fraction_range, seed)?;
    let mut noisy = cube.clone();
    apply_stripes(&mut noisy, &records);
    Ok((noisy, records.iter().map(|r| r.band).collect()))
}

fn plan_dead_lines(cube: &HsiCube, band_count: usize, width_range: (usize, usize), seed: u64) -> Result<Vec<DeadLine>> {
    check_band_count(band_count, cube.bands(), "dead-line")?;
    let cols = cube.cols();
    if width_range.1 >= cols {
        return Err(Error::InvalidArgument(format!(
            "dead-line width {} must be below the column count {cols}",
            width_range.1
        )));
    }
    let mut rng = stream(seed, STREAM_DEAD_LINES);
    let chosen = index::sample(&mut rng, cube.bands(), band_count).into_vec();
    let mut lines = Vec::new();
    for band in chosen {
        let events = rng.random_range(1..=3usize);
        for _ in 0..events {
            let width = rng.random_range(width_range.0..=width_range.1);
            let col = rng.random_range(0..=cols - width);
            lines.push(DeadLine { band, col, width });
        }
    }
    Ok(lines)
}

fn apply_dead_lines(cube: &mut HsiCube, lines: &[DeadLine]) {
    let (rows, cols) = (cube.rows(), cube.cols());
    for line in lines {
        let band = cube.band_mut(line.band);
        for r in 0..rows {
            band[r * cols + line.col..r * cols + line.col + line.width].fill(0.0);
        }
    }
}

/// Zeroes one to three column runs in each of `band_count` bands.
pub fn add_dead_lines(
    cube: &HsiCube,
    band_count: usize,
    width_range: (usize, usize),
    seed: u64,
) -> Result<(HsiCube, Vec<DeadLine>)> {
    if width_range.0 == 0 || width_range.0 > width_range.1 {
        return Err(Error::InvalidArgument(format!("dead-line width range {width_range:?} invalid")));
    }
    let lines = plan_dead_lines(cube, band_count, width_range, seed)?;
    let mut noisy = cube.clone();
    apply_dead_lines(&mut noisy, &lines);
    Ok((noisy, lines))
}

/// Cube-wide SNR in dB, `10 log10(sum clean^2 / sum (noisy - clean)^2)`,
/// capped at [`DB_CAP`] for identical inputs.
pub fn measure_snr(clean: &HsiCube, noisy: &HsiCube) -> Result<f64> {
    clean.check_same_dims(noisy)?;
    let (signal, noise) = clean
        .data()
        .iter()
        .zip(noisy.data())
        .fold((0.0f64, 0.0f64), |(s, n), (&c, &y)| {
            let d = y as f64 - c as f64;
            (s + c as f64 * c as f64, n + d * d)
        });
    Ok(snr_db(signal, noise))
}

fn snr_db(signal: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        DB_CAP
    } else {
        10.0 * (signal / noise).log10()
    }
}

/// Finds `c >= 0` with `sum (s + c g)^2 == target` by bisection.
fn calibrate_scale(sparse: &[f64], dense: &[f64], target_power: f64, target_db: f64) -> Result<f64> {
    let (aa, ab, bb) = sparse.iter().zip(dense).fold((0.0, 0.0, 0.0), |(aa, ab, bb), (s, g)| {
        (aa + s * s, ab + s * g, bb + g * g)
    });
    let power = |c: f64| aa + 2.0 * c * ab + c * c * bb;
    if bb == 0.0 {
        return Err(Error::UnreachableSnr {
            target_db,
            reason: "no dense noise to scale".into(),
        });
    }
    // power() is increasing for c beyond its vertex.
    let lo_start = (-ab / bb).max(0.0);
    if power(lo_start) > target_power {
        return Err(Error::UnreachableSnr {
            target_db,
            reason: format!(
                "sparse noise alone gives {:.3} dB",
                10.0 * ((target_power * 10f64.powf(target_db / 10.0)) / power(lo_start)).log10()
            ),
        });
    }
    let mut lo = lo_start;
    let mut hi = lo_start.max(1.0);
    while power(hi) < target_power {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NonFinite("SNR calibration diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if power(mid) < target_power {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Applies one simulated case: stripes, then dead lines, then Gaussian noise,
/// with the Gaussian sigmas rescaled by a single factor when an SNR target is set.
pub fn simulate_case(cube: &HsiCube, spec: &NoiseSpec) -> Result<(HsiCube, NoiseManifest)> {
    spec.validate()?;
    let case = spec.case;
    let stripes = if case.has_stripes() {
        plan_stripes(cube, spec.stripe_band_count, spec.stripe_row_fraction_range, spec.seed)?
    } else {
        Vec::new()
    };
    let dead_lines = if case.has_dead_lines() {
        plan_dead_lines(cube, spec.deadline_band_count, spec.deadline_width_range, spec.seed)?
    } else {
        Vec::new()
    };
    let mut noisy = cube.clone();
    apply_stripes(&mut noisy, &stripes);
    apply_dead_lines(&mut noisy, &dead_lines);

    let mut manifest = NoiseManifest {
        case,
        seed: spec.seed,
        target_snr_db: spec.target_snr_db,
        gaussian_scale: 1.0,
        sigmas: Vec::new(),
        stripes,
        dead_lines,
    };

    let signal: f64 = cube.data().iter().map(|&v| v as f64 * v as f64).sum();
    if case.has_gaussian() {
        let sigmas = draw_sigmas(cube.bands(), spec.gaussian_sigma_range, spec.seed);
        let field = gaussian_field(cube, &sigmas, spec.seed);
        let scale = match spec.target_snr_db {
            Some(db) => {
                let sparse: Vec<f64> = noisy
                    .data()
                    .iter()
                    .zip(cube.data())
                    .map(|(&y, &x)| y as f64 - x as f64)
                    .collect();
                calibrate_scale(&sparse, &field, signal / 10f64.powf(db / 10.0), db)?
            }
            None => 1.0,
        };
        for (v, n) in noisy.data_mut().iter_mut().zip(&field) {
            *v = (*v as f64 + scale * n) as f32;
        }
        manifest.gaussian_scale = scale;
        manifest.sigmas = sigmas.iter().map(|s| s * scale).collect();
    } else if let Some(db) = spec.target_snr_db {
        let achieved = measure_snr(cube, &noisy)?;
        if (achieved - db).abs() > 0.5 {
            return Err(Error::UnreachableSnr {
                target_db: db,
                reason: format!("case has no dense component and its sparse noise gives {achieved:.3} dB"),
            });
        }
    }
    Ok((noisy, manifest))
}

impl NoiseManifest {
    /// Bands touched by stripes or dead lines, sorted and deduplicated.
    pub fn sparse_bands(&self) -> Vec<usize> {
        let mut bands: Vec<usize> = self
            .stripes
            .iter()
            .map(|s| s.band)
            .chain(self.dead_lines.iter().map(|d| d.band))
            .collect();
        bands.sort_unstable();
        bands.dedup();
        bands
    }

    /// Rebuilds the stripe and dead-line component on top of `clean`.
    pub fn apply_sparse(&self, clean: &HsiCube) -> Result<HsiCube> {
        let mut out = clean.clone();
        for s in &self.stripes {
            if s.band >= out.bands() || s.added_rows.iter().chain(&s.subtracted_rows).any(|&r| r >= out.rows()) {
                return Err(Error::DimensionMismatch("stripe record outside cube".into()));
            }
        }
        for d in &self.dead_lines {
            if d.band >= out.bands() || d.col + d.width > out.cols() {
                return Err(Error::DimensionMismatch("dead line outside cube".into()));
            }
        }
        apply_stripes(&mut out, &self.stripes);
        apply_dead_lines(&mut out, &self.dead_lines);
        Ok(out)
    }

    /// Line-oriented text form:
    ///
    /// ```text
    /// case <name>
    /// seed <u64>
    /// target_snr_db <dB|none>
    /// gaussian_scale <factor>
    /// sigma <band> <sigma>                       (per band)
    /// stripe <band> <mean> add <rows> sub <rows> (rows comma separated, `-` if empty)
    /// dead_line <band> <col> <width>
    /// ```
    pub fn to_text(&self) -> String {
        let rows = |r: &[usize]| {
            if r.is_empty() {
                "-".to_string()
            } else {
                r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            }
        };
        let mut out = String::new();
        let _ = writeln!(out, "case {}", self.case);
        let _ = writeln!(out, "seed {}", self.seed);
        match self.target_snr_db {
            Some(db) => {
                let _ = writeln!(out, "target_snr_db {db}");
            }
            None => out.push_str("target_snr_db none\n"),
        }
        let _ = writeln!(out, "gaussian_scale {}", self.gaussian_scale);
        for (b, s) in self.sigmas.iter().enumerate() {
            let _ = writeln!(out, "sigma {b} {s}");
        }
        for s in &self.stripes {
            let _ = writeln!(
                out,
                "stripe {} {} add {} sub {}",
                s.band,
                s.mean,
                rows(&s.added_rows),
                rows(&s.subtracted_rows)
            );
        }
        for d in &self.dead_lines {
            let _ = writeln!(out, "dead_line {} {} {}", d.band, d.col, d.width);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut case = None;
        let mut seed = None;
        let mut target_snr_db = None;
        let mut gaussian_scale = 1.0;
        let mut sigmas = Vec::new();
        let mut stripes = Vec::new();
        let mut dead_lines = Vec::new();

        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| Error::Config { line: line_no, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let Some((&key, args)) = fields.split_first() else {
                continue;
            };
            let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| err(format!("bad number {s:?}"))) };
            let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| err(format!("bad integer {s:?}"))) };
            let rows = |s: &str| -> Result<Vec<usize>> {
                if s == "-" {
                    Ok(Vec::new())
                } else {
                    s.split(',').map(&int).collect()
                }
            };
            let want = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(err(format!("{key} expects {n} fields, found {}", args.len())))
                }
            };
            match key {
                "case" => {
                    want(1)?;
                    case = Some(args[0].parse::<NoiseCase>().map_err(|e| err(e.to_string()))?);
                }
                "seed" => {
                    want(1)?;
                    seed = Some(args[0].parse::<u64>().map_err(|_| err("bad seed".into()))?);
                }
                "target_snr_db" => {
                    want(1)?;
                    target_snr_db = if args[0] == "none" { None } else { Some(num(args[0])?) };
                }
                "gaussian_scale" => {
                    want(1)?;
                    gaussian_scale = num(args[0])?;
                }
                "sigma" => {
                    want(2)?;
                    let band = int(args[0])?;
                    if band != sigmas.len() {
                        return Err(err(format!("sigma for band {band} out of order")));
                    }
                    sigmas.push(num(args[1])?);
                }
                "stripe" => {
                    want(6)?;
                    if args[2] != "add" || args[4] != "sub" {
                        return Err(err("stripe expects `<band> <mean> add <rows> sub <rows>`".into()));
                    }
                    stripes.push(StripeRecord {
                        band: int(args[0])?,
                        mean: args[1].parse().map_err(|_| err(format!("bad mean {:?}", args[1])))?,
                        added_rows: rows(args[3])?,
                        subtracted_rows: rows(args[5])?,
                    });
                }
                "dead_line" => {
                    want(3)?;
                    dead_lines.push(DeadLine {
                        band: int(args[0])?,
                        col: int(args[1])?,
                        width: int(args[2])?,
                    });
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        Ok(Self {
            case: case.ok_or(Error::Config { line: 0, message: "missing `case`".into() })?,
            seed: seed.ok_or(Error::Config { line: 0, message: "missing `seed`".into() })?,
            target_snr_db,
            gaussian_scale,
            sigmas,
            stripes,
            dead_lines,
        })
    }
}
