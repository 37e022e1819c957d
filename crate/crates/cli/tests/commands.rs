use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ssgn_core::checkpoint::encode_checkpoint;
use ssgn_core::cube::write_cube;
use ssgn_core::noise::measure_snr;
use ssgn_core::synthetic::smooth_cube;
use ssgn_core::{load_checkpoint, load_cube, save_cube, save_model, HsiCube, MetricsReport, SsgnArch, SsgnModel};
use tempfile::TempDir;

fn ssgn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssgn")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ssgn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Runs a command expected to fail and returns its diagnostic.
fn fails(args: &[&str]) -> String {
    let out = ssgn(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "multi-line diagnostic: {err}");
    err
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A cube in arbitrary units, as raw sensor data would be.
fn raw_cube(rows: usize, cols: usize, bands: usize, seed: u64) -> HsiCube {
    let base = smooth_cube(rows, cols, bands, seed);
    let data = base.data().iter().map(|v| 200.0 + 3000.0 * v).collect();
    HsiCube::new(rows, cols, bands, data).unwrap()
}

fn write(dir: &TempDir, name: &str, cube: &HsiCube) -> PathBuf {
    let path = dir.path().join(name);
    save_cube(cube, &path).unwrap();
    path
}

fn simulate_args<'a>(input: &'a Path, output: &'a Path, case: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec!["simulate", "--input", s(input), "--case", case, "--output", s(output)];
    args.extend_from_slice(extra);
    args
}

#[test]
fn zero_gaussian_noise_writes_the_normalized_input() {
    let dir = TempDir::new().unwrap();
    let cube = raw_cube(20, 18, 6, 1);
    let input = write(&dir, "clean.hsic", &cube);
    let output = dir.path().join("noisy.hsic");
    ok(&simulate_args(&input, &output, "1", &["--sigma-low", "0", "--sigma-high", "0"]));
    let mut expected = Vec::new();
    write_cube(&cube.normalize_per_band().unwrap(), &mut expected).unwrap();
    assert_eq!(fs::read(&output).unwrap(), expected);
    assert!(dir.path().join("noisy.hsic.manifest").exists());
}

#[test]
fn mixture_simulation_is_deterministic_and_hits_the_target() {
    let dir = TempDir::new().unwrap();
    let clean = raw_cube(64, 64, 32, 2);
    let input = write(&dir, "clean.hsic", &clean);
    let a = dir.path().join("a.hsic");
    let b = dir.path().join("b.hsic");
    let printed = ok(&simulate_args(&input, &a, "5", &["--snr", "18", "--seed", "7"]));
    ok(&simulate_args(&input, &b, "5", &["--snr", "18", "--seed", "7"]));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.hsic.manifest")).unwrap(),
        fs::read(dir.path().join("b.hsic.manifest")).unwrap()
    );

    let db: f64 = printed.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((db - 18.0).abs() <= 0.5, "printed {printed}");
    let measured = measure_snr(&clean.normalize_per_band().unwrap(), &load_cube(&a).unwrap()).unwrap();
    assert!((measured - db).abs() < 1e-3);
}

#[test]
fn simulate_rejects_bad_arguments() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "clean.hsic", &raw_cube(8, 8, 4, 3));
    let output = dir.path().join("noisy.hsic");
    assert!(!ssgn(&simulate_args(&input, &output, "6", &[])).status.success());
    fails(&simulate_args(&dir.path().join("missing.hsic"), &output, "1", &[]));
    fails(&simulate_args(&input, &output, "1", &["--sigma-low", "0.3", "--sigma-high", "0.1"]));
}

fn train_setup(config: &str) -> (TempDir, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let clean = dir.path().join("clean");
    fs::create_dir(&clean).unwrap();
    save_cube(&raw_cube(30, 30, 6, 4), clean.join("scene.hsic")).unwrap();
    fs::write(clean.join("notes.txt"), "not a cube").unwrap();
    let cfg = dir.path().join("train.cfg");
    fs::write(&cfg, config).unwrap();
    (dir, clean, cfg)
}

const TINY_CONFIG: &str = "profile = desk\nadjacent_bands = 2\nblocks = 1\nc_scale = 2\n\
                           batch_size = 4\npatch = 10\nstride = 10\nnoise_case = 3\nstripe_bands = 1\n";

#[test]
fn zero_epochs_saves_the_seeded_initialization() {
    let (dir, clean, cfg) = train_setup(&format!("{TINY_CONFIG}epochs = 0\nseed = 9\n"));
    let out = dir.path().join("model.ssgn");
    ok(&["train", "--clean-dir", s(&clean), "--config", s(&cfg), "--out", s(&out)]);
    let (model, _) = load_checkpoint(&out).unwrap();
    let arch = SsgnArch {
        adjacent_bands: 2,
        blocks: 1,
        c_scale: 2,
    };
    assert_eq!(model, SsgnModel::init(arch, 9).unwrap());
    assert_eq!(fs::read_to_string(dir.path().join("model.ssgn.loss.log")).unwrap(), "");
}

#[test]
fn training_twice_gives_identical_checkpoints() {
    let (dir, clean, cfg) = train_setup(&format!("{TINY_CONFIG}epochs = 2\n"));
    let a = dir.path().join("a.ssgn");
    let b = dir.path().join("b.ssgn");
    ok(&["train", "--clean-dir", s(&clean), "--config", s(&cfg), "--out", s(&a)]);
    ok(&["train", "--clean-dir", s(&clean), "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let log = fs::read_to_string(dir.path().join("a.ssgn.loss.log")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("epoch 0 lr 0.001 loss "), "{log}");
    let (model, adam) = load_checkpoint(&a).unwrap();
    assert!(adam.is_some_and(|s| s.t > 0));
    assert_eq!(model.arch.c_scale, 2);
}

#[test]
fn config_errors_name_the_line() {
    let (dir, clean, cfg) = train_setup("profile = desk\nepochs = 1\nlearning_rate = 3\n");
    let out = dir.path().join("model.ssgn");
    let err = fails(&["train", "--clean-dir", s(&clean), "--config", s(&cfg), "--out", s(&out)]);
    assert!(err.contains("line 3"), "{err}");
    assert!(!out.exists());

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    fs::write(&cfg, TINY_CONFIG).unwrap();
    let err = fails(&["train", "--clean-dir", s(&empty), "--config", s(&cfg), "--out", s(&out)]);
    assert!(err.contains("no .hsic"), "{err}");
}

fn zero_model(dir: &TempDir, k: usize) -> PathBuf {
    let arch = SsgnArch {
        adjacent_bands: k,
        blocks: 1,
        c_scale: 2,
    };
    let path = dir.path().join("zero.ssgn");
    save_model(&SsgnModel::zeros(arch).unwrap(), &path).unwrap();
    path
}

#[test]
fn zero_model_denoising_returns_the_input() {
    let dir = TempDir::new().unwrap();
    let cube = raw_cube(13, 21, 7, 5);
    let input = write(&dir, "in.hsic", &cube);
    let model = zero_model(&dir, 2);
    let output = dir.path().join("out.hsic");
    ok(&["denoise", "--input", s(&input), "--model", s(&model), "--output", s(&output)]);
    let out = load_cube(&output).unwrap();
    assert_eq!(out.dims(), cube.dims());
    assert!(out.norm().is_none());
    let ranges = cube.normalize_per_band().unwrap().norm().unwrap().to_vec();
    for (band, &(lo, hi)) in ranges.iter().enumerate() {
        for (a, b) in out.band(band).iter().zip(cube.band(band)) {
            assert!(((a - b) / (hi - lo)).abs() <= 1e-6, "band {band}: {a} vs {b}");
        }
    }

    ok(&["denoise", "--input", s(&input), "--model", s(&model), "--output", s(&output), "--k", "2"]);
    let err = fails(&["denoise", "--input", s(&input), "--model", s(&model), "--output", s(&output), "--k", "4"]);
    assert!(err.contains("error"), "{err}");
}

#[test]
fn denoise_rejects_corrupt_checkpoints() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.hsic", &raw_cube(8, 8, 4, 6));
    let model = dir.path().join("bad.ssgn");
    let mut bytes = encode_checkpoint(&SsgnModel::zeros(SsgnArch::DESK).unwrap(), None).unwrap();
    bytes.truncate(bytes.len() / 2);
    fs::write(&model, bytes).unwrap();
    let output = dir.path().join("out.hsic");
    fails(&["denoise", "--input", s(&input), "--model", s(&model), "--output", s(&output)]);
    assert!(!output.exists());
}

fn report(dir: &TempDir, reference: &Path, test: &Path) -> MetricsReport {
    let path = dir.path().join("report.txt");
    ok(&["evaluate", "--ref", s(reference), "--test", s(test), "--report", s(&path)]);
    MetricsReport::parse(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn evaluating_a_cube_against_itself() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "c.hsic", &raw_cube(24, 24, 5, 7));
    let r = report(&dir, &path, &path);
    assert_eq!(r.mpsnr, 99.0);
    assert!((r.mssim - 1.0).abs() < 1e-12);
    assert_eq!(r.msa, 0.0);
}

#[test]
fn report_aggregates_are_band_means() {
    let dir = TempDir::new().unwrap();
    let clean = raw_cube(40, 40, 16, 8);
    let reference = write(&dir, "clean.hsic", &clean);
    let noisy = dir.path().join("noisy.hsic");
    ok(&simulate_args(&reference, &noisy, "3", &["--seed", "1"]));
    let r = report(&dir, &reference, &noisy);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert_eq!(r.per_band_psnr.len(), 16);
    assert!((r.mpsnr - mean(&r.per_band_psnr)).abs() < 1e-5);
    assert!((r.mssim - mean(&r.per_band_ssim)).abs() < 1e-5);
    assert!(r.mpsnr < 40.0 && r.msa > 0.0);
}

/// Mean square of the normalized cube.
fn normalized_power(cube: &HsiCube) -> f64 {
    let normalized = cube.normalize_per_band().unwrap();
    normalized.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / normalized.data().len() as f64
}

fn snr_and_report(case: &str, extra: &[&str], clean: &HsiCube) -> (f64, MetricsReport) {
    let dir = TempDir::new().unwrap();
    let reference = write(&dir, "clean.hsic", clean);
    let noisy = dir.path().join("noisy.hsic");
    let printed = ok(&simulate_args(&reference, &noisy, case, extra));
    let snr = printed.split_whitespace().nth(1).unwrap().parse().unwrap();
    (snr, report(&dir, &reference, &noisy))
}

#[test]
fn report_psnr_relates_to_the_measured_snr() {
    let clean = raw_cube(64, 64, 32, 9);
    // PSNR uses a unit peak and SNR the signal power, so with the same noise
    // level in every band they differ by the mean square of the signal.
    let (snr, r) = snr_and_report("1", &["--sigma-low", "0.05", "--sigma-high", "0.05", "--seed", "2"], &clean);
    let expected = snr - 10.0 * normalized_power(&clean).log10();
    assert!((r.mpsnr - expected).abs() <= 0.5, "MPSNR {} vs {expected} (SNR {snr})", r.mpsnr);

    // With band-dependent noise the SNR is only a lower bound on the mean of
    // per-band PSNRs, since the signal power is at most 1.
    let (snr, r) = snr_and_report("5", &["--snr", "18", "--seed", "2"], &clean);
    assert!((snr - 18.0).abs() <= 0.5);
    assert!(r.mpsnr >= snr, "MPSNR {} vs SNR {snr}", r.mpsnr);
}

#[test]
fn evaluate_rejects_mismatched_cubes() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.hsic", &raw_cube(10, 10, 4, 1));
    let b = write(&dir, "b.hsic", &raw_cube(10, 12, 4, 1));
    let err = fails(&["evaluate", "--ref", s(&a), "--test", s(&b), "--report", s(&dir.path().join("r.txt"))]);
    assert!(err.contains("does not match"), "{err}");
}

#[test]
fn noiseless_pipeline_is_the_identity() {
    let dir = TempDir::new().unwrap();
    let clean = write(&dir, "clean.hsic", &raw_cube(32, 32, 8, 10));
    let noisy = dir.path().join("noisy.hsic");
    ok(&simulate_args(&clean, &noisy, "1", &["--sigma-low", "0", "--sigma-high", "0"]));
    let model = zero_model(&dir, 4);
    let denoised = dir.path().join("denoised.hsic");
    ok(&["denoise", "--input", s(&noisy), "--model", s(&model), "--output", s(&denoised)]);
    let r = report(&dir, &clean, &denoised);
    assert!(r.mpsnr >= 99.0 - 1e-9, "{}", r.mpsnr);
}

#[test]
fn synth_writes_a_cube() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.hsic");
    ok(&["synth", "--rows", "9", "--cols", "7", "--bands", "3", "--seed", "4", "--output", s(&out)]);
    assert_eq!(load_cube(&out).unwrap(), smooth_cube(9, 7, 3, 4));
    fails(&["synth", "--rows", "0", "--cols", "7", "--bands", "3", "--output", s(&out)]);
}
