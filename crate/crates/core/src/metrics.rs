//! Full-reference quality indices: per-band PSNR and SSIM, their means, and
//! the mean spectral angle.
//!
//! Inputs are expected in the normalized `[0, 1]` domain, so the PSNR peak
//! and the SSIM dynamic range are both 1.

use std::fmt::Write as _;

use crate::cube::{Band, HsiCube};
use crate::noise::DB_CAP;
use crate::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn check_band_dims(a: &Band, b: &Band) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!("band {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// `10 log10(1 / MSE)`, capped at [`DB_CAP`].
pub fn psnr(reference: &Band, test: &Band) -> Result<f64> {
    check_band_dims(reference, test)?;
    Ok(psnr_values(&widen(reference.data()), &widen(test.data())))
}

/// [`psnr`] on equally long `f64` sample slices.
pub fn psnr_values(reference: &[f64], test: &[f64]) -> f64 {
    assert_eq!(reference.len(), test.len(), "sample counts differ");
    let sse: f64 = reference.iter().zip(test).map(|(r, t)| (r - t) * (r - t)).sum();
    if sse == 0.0 {
        return DB_CAP;
    }
    let mse = sse / reference.len() as f64;
    (10.0 * (1.0 / mse).log10()).min(DB_CAP)
}

fn widen(data: &[f32]) -> Vec<f64> {
    data.iter().map(|&v| v as f64).collect()
}

/// Normalized 1-D Gaussian taps of the SSIM window.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - half;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Gaussian-weighted sums over every fully contained window, computed
/// separably: rows first, then columns.
fn filter_valid(plane: &[f64], rows: usize, cols: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let out_cols = cols - SSIM_WINDOW + 1;
    let out_rows = rows - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; rows * out_cols];
    for r in 0..rows {
        let row = &plane[r * cols..(r + 1) * cols];
        for c in 0..out_cols {
            horiz[r * out_cols + c] = taps.iter().zip(&row[c..c + SSIM_WINDOW]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; out_rows * out_cols];
    for r in 0..out_rows {
        for c in 0..out_cols {
            out[r * out_cols + c] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * horiz[(r + i) * out_cols + c])
                .sum();
        }
    }
    out
}

/// Mean local SSIM over all fully contained 11x11 Gaussian windows.
pub fn ssim(reference: &Band, test: &Band) -> Result<f64> {
    check_band_dims(reference, test)?;
    let (rows, cols) = reference.dims();
    ssim_values(rows, cols, &widen(reference.data()), &widen(test.data()))
}

/// [`ssim`] on row-major `rows x cols` planes of `f64` samples.
pub fn ssim_values(rows: usize, cols: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != rows * cols || y.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{} and {} samples for a {rows}x{cols} plane",
            x.len(),
            y.len()
        )));
    }
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::BandTooSmall {
            window: SSIM_WINDOW,
            rows,
            cols,
        });
    }
    let taps = gaussian_taps();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let [mx, my, sxx, syy, sxy] = [x, y, &xx[..], &yy[..], &xy[..]].map(|p| filter_valid(p, rows, cols, &taps));

    let n = mx.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cov = sxy[i] - ux * uy;
        let num = (2.0 * ux * uy + C1) * (2.0 * cov + C2);
        let den = (ux * ux + uy * uy + C1) * (vx + vy + C2);
        total += num / den;
    }
    Ok(total / n as f64)
}

/// Mean spectral angle in degrees. Pixels where either spectrum is zero
/// count as 0 degrees.
pub fn msa(reference: &HsiCube, test: &HsiCube) -> Result<f64> {
    reference.check_same_dims(test)?;
    let (rows, cols, bands) = reference.dims();
    if bands < 2 {
        return Err(Error::InvalidArgument("spectral angle needs at least two bands".into()));
    }
    let plane = rows * cols;
    let (r, t) = (reference.data(), test.data());
    let mut total = 0.0;
    for p in 0..plane {
        let (mut dot, mut nr, mut nt) = (0.0f64, 0.0f64, 0.0f64);
        for b in 0..bands {
            let a = r[b * plane + p] as f64;
            let c = t[b * plane + p] as f64;
            dot += a * c;
            nr += a * a;
            nt += c * c;
        }
        if nr > 0.0 && nt > 0.0 {
            // sqrt(n * n) == n exactly, so identical spectra give exactly 0.
            total += (dot / (nr * nt).sqrt()).clamp(-1.0, 1.0).acos().to_degrees();
        }
    }
    Ok(total / plane as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_band_psnr: Vec<f64>,
    pub per_band_ssim: Vec<f64>,
    pub mpsnr: f64,
    pub mssim: f64,
    /// Degrees.
    pub msa: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

impl MetricsReport {
    /// Header line with the aggregates, then one line per band.
    pub fn to_text(&self) -> String {
        let mut out = format!("MPSNR {:.6} MSSIM {:.6} MSA {:.6}\n", self.mpsnr, self.mssim, self.msa);
        for (k, (p, s)) in self.per_band_psnr.iter().zip(&self.per_band_ssim).enumerate() {
            let _ = writeln!(out, "band {k:>4} psnr {p:>10.6} ssim {s:>9.6}");
        }
        out
    }

    /// Reads the format written by [`to_text`](Self::to_text).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Config { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty report".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 6 || h[0] != "MPSNR" || h[2] != "MSSIM" || h[4] != "MSA" {
            return Err(bad(1, format!("malformed header {header:?}")));
        }
        let num = |line: usize, s: &str| s.parse::<f64>().map_err(|_| bad(line, format!("invalid number {s:?}")));
        let (mpsnr, mssim, msa) = (num(1, h[1])?, num(1, h[3])?, num(1, h[5])?);
        let mut per_band_psnr = Vec::new();
        let mut per_band_ssim = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 || f[0] != "band" || f[2] != "psnr" || f[4] != "ssim" {
                return Err(bad(i + 1, format!("malformed band line {line:?}")));
            }
            if f[1].parse::<usize>().ok() != Some(per_band_psnr.len()) {
                return Err(bad(i + 1, format!("expected band {}", per_band_psnr.len())));
            }
            per_band_psnr.push(num(i + 1, f[3])?);
            per_band_ssim.push(num(i + 1, f[5])?);
        }
        Ok(Self {
            per_band_psnr,
            per_band_ssim,
            mpsnr,
            mssim,
            msa,
        })
    }
}

/// Per-band PSNR and SSIM, their means, and MSA.
pub fn evaluate(reference: &HsiCube, test: &HsiCube) -> Result<MetricsReport> {
    reference.check_same_dims(test)?;
    let mut per_band_psnr = Vec::with_capacity(reference.bands());
    let mut per_band_ssim = Vec::with_capacity(reference.bands());
    for k in 0..reference.bands() {
        let (r, t) = (reference.band_plane(k), test.band_plane(k));
        per_band_psnr.push(psnr(&r, &t)?);
        per_band_ssim.push(ssim(&r, &t)?);
    }
    Ok(MetricsReport {
        mpsnr: mean(&per_band_psnr),
        mssim: mean(&per_band_ssim),
        msa: msa(reference, test)?,
        per_band_psnr,
        per_band_ssim,
    })
}
