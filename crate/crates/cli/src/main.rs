//! `ssgn`: simulate, train, denoise and evaluate hyperspectral cubes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ssgn_core::noise::measure_snr;
use ssgn_core::synthetic::smooth_cube;
use ssgn_core::train::{train_with_progress, TrainConfig};
use ssgn_core::{
    denoise_cube, evaluate, load_checkpoint, load_cube, save_checkpoint, save_cube, simulate_case, HsiCube, NoiseCase,
    NoiseSpec,
};

#[derive(Parser)]
#[command(name = "ssgn", version, about = "Mixed-noise removal for hyperspectral cubes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add simulated noise to a clean cube.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        /// 1 Gaussian, 2 stripes, 3 Gaussian + stripes, 4 Gaussian + dead lines, 5 all three.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        case: u8,
        /// Target SNR in dB, reached by scaling the Gaussian component.
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
        /// Lower end of the per-band Gaussian sigma range.
        #[arg(long)]
        sigma_low: Option<f64>,
        /// Upper end of the per-band Gaussian sigma range.
        #[arg(long)]
        sigma_high: Option<f64>,
        /// Use the stripe and dead-line band counts as given for 191-band
        /// scenes instead of scaling them to the cube.
        #[arg(long)]
        unscaled_band_counts: bool,
    },
    /// Train a model on every `.hsic` cube in a directory.
    Train {
        #[arg(long)]
        clean_dir: PathBuf,
        /// `key = value` config file.
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint path; the loss log goes next to it with a `.loss.log` suffix.
        #[arg(long)]
        out: PathBuf,
    },
    /// Denoise every band of a cube.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Expected number of adjacent bands; must match the checkpoint.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Compare a test cube against a reference and write a metrics report.
    Evaluate {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Write a smooth synthetic cube.
    Synth {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        bands: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            input,
            case,
            snr,
            seed,
            output,
            sigma_low,
            sigma_high,
            unscaled_band_counts,
        } => {
            let cube = normalized(load(&input)?)?;
            let mut spec = NoiseSpec::new(NoiseCase::from_number(case)?, seed);
            if !unscaled_band_counts {
                spec = spec.scaled_to_bands(cube.bands());
            }
            spec.target_snr_db = snr;
            let (lo, hi) = spec.gaussian_sigma_range;
            spec.gaussian_sigma_range = (sigma_low.unwrap_or(lo), sigma_high.unwrap_or(hi));
            let (noisy, manifest) = simulate_case(&cube, &spec)?;
            save_cube(&noisy, &output).with_context(|| format!("writing {}", output.display()))?;
            let manifest_path = suffixed(&output, ".manifest");
            fs::write(&manifest_path, manifest.to_text())
                .with_context(|| format!("writing {}", manifest_path.display()))?;
            println!("SNR {:.4} dB", measure_snr(&cube, &noisy)?);
        }
        Command::Train { clean_dir, config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let config = TrainConfig::parse(&text).with_context(|| format!("in {}", config.display()))?;
            let cubes = load_dir(&clean_dir)?;
            let outcome = train_with_progress(&cubes, &config, |e| eprintln!("{}", e.to_line()))?;
            save_checkpoint(&outcome.model, Some(&outcome.adam), &out)
                .with_context(|| format!("writing {}", out.display()))?;
            let log_path = suffixed(&out, ".loss.log");
            fs::write(&log_path, outcome.log.to_text()).with_context(|| format!("writing {}", log_path.display()))?;
        }
        Command::Denoise { input, model, output, k } => {
            let cube = load(&input)?;
            let (model, _) = load_checkpoint(&model).with_context(|| format!("reading {}", model.display()))?;
            let denoised = denoise_cube(&model, &cube, k)?;
            save_cube(&denoised, &output).with_context(|| format!("writing {}", output.display()))?;
        }
        Command::Evaluate { reference, test, report } => {
            let reference = normalized(load(&reference)?)?;
            let ranges = reference.norm().expect("normalized cube has ranges").to_vec();
            let test = load(&test)?;
            let test = match test.norm() {
                Some(_) => test.denormalize_per_band()?,
                None => test,
            };
            if !test.same_dims(&reference) {
                bail!("test cube {:?} does not match reference {:?}", test.dims(), reference.dims());
            }
            let result = evaluate(&reference, &test.map_with_ranges(&ranges)?)?;
            fs::write(&report, result.to_text()).with_context(|| format!("writing {}", report.display()))?;
            println!("MPSNR {:.4} MSSIM {:.4} MSA {:.4}", result.mpsnr, result.mssim, result.msa);
        }
        Command::Synth {
            rows,
            cols,
            bands,
            seed,
            output,
        } => {
            if rows == 0 || cols == 0 || bands == 0 {
                bail!("cube dimensions must be positive");
            }
            save_cube(&smooth_cube(rows, cols, bands, seed), &output)
                .with_context(|| format!("writing {}", output.display()))?;
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<HsiCube> {
    load_cube(path).with_context(|| format!("reading {}", path.display()))
}

/// The cube itself if it already carries normalization ranges.
fn normalized(cube: HsiCube) -> Result<HsiCube> {
    if cube.is_normalized() {
        Ok(cube)
    } else {
        Ok(cube.normalize_per_band()?)
    }
}

fn load_dir(dir: &Path) -> Result<Vec<HsiCube>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("listing {}", dir.display()))?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "hsic"));
    paths.sort();
    if paths.is_empty() {
        bail!("no .hsic cubes in {}", dir.display());
    }
    paths.iter().map(|p| normalized(load(p)?)).collect()
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
