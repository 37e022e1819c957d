//! Hyperspectral cube storage, per-band normalization and the HSIC file format.
//!
//! A cube holds `rows x cols x bands` samples in band-sequential order: each
//! band is one contiguous row-major plane. The optional normalization block
//! records the per-band `(min, max)` range a cube was mapped from, so that
//! results can be returned to the original units.

mod io;

pub use io::{load_cube, read_cube, save_cube, write_cube, HSIC_MAGIC, HSIC_VERSION};

use crate::{Error, Result};

/// A single 2-D plane of samples, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Band {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ZeroDimension("band"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "band {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f32) -> Self {
        assert!(rows > 0 && cols > 0, "band dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a band by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(rows > 0 && cols > 0, "band dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.data[row * self.cols + col] = value;
    }

    /// Copies out the `size x size` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, rows: usize, cols: usize) -> Result<Band> {
        if row + rows > self.rows || col + cols > self.cols || rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "crop {rows}x{cols} at ({row}, {col}) outside {}x{} band",
                self.rows, self.cols
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in row..row + rows {
            let start = r * self.cols + col;
            data.extend_from_slice(&self.data[start..start + cols]);
        }
        Ok(Band { rows, cols, data })
    }
}

/// `M x N x B` hyperspectral cube in band-sequential layout.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    rows: usize,
    cols: usize,
    bands: usize,
    data: Vec<f32>,
    norm: Option<Vec<(f32, f32)>>,
}

impl HsiCube {
    pub fn new(rows: usize, cols: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        Self::with_norm(rows, cols, bands, data, None)
    }

    pub fn with_norm(
        rows: usize,
        cols: usize,
        bands: usize,
        data: Vec<f32>,
        norm: Option<Vec<(f32, f32)>>,
    ) -> Result<Self> {
        if rows == 0 {
            return Err(Error::ZeroDimension("rows"));
        }
        if cols == 0 {
            return Err(Error::ZeroDimension("cols"));
        }
        if bands == 0 {
            return Err(Error::ZeroDimension("bands"));
        }
        if data.len() != rows * cols * bands {
            return Err(Error::DimensionMismatch(format!(
                "cube {rows}x{cols}x{bands} needs {} values, got {}",
                rows * cols * bands,
                data.len()
            )));
        }
        if let Some(ranges) = &norm {
            if ranges.len() != bands {
                return Err(Error::DimensionMismatch(format!(
                    "{} normalization ranges for {bands} bands",
                    ranges.len()
                )));
            }
            if let Some((b, (lo, hi))) = ranges.iter().enumerate().find(|(_, (lo, hi))| !(lo <= hi)) {
                return Err(Error::InvalidArgument(format!(
                    "band {b} normalization range ({lo}, {hi}) has min > max"
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            bands,
            data,
            norm,
        })
    }

    pub fn zeros(rows: usize, cols: usize, bands: usize) -> Result<Self> {
        Self::new(rows, cols, bands, vec![0.0; rows * cols * bands])
    }

    /// Stacks equally sized bands into a cube.
    pub fn from_bands(bands: &[Band]) -> Result<Self> {
        let first = bands.first().ok_or(Error::ZeroDimension("bands"))?;
        let (rows, cols) = first.dims();
        let mut data = Vec::with_capacity(rows * cols * bands.len());
        for (i, band) in bands.iter().enumerate() {
            if band.dims() != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "band {i} is {}x{}, expected {rows}x{cols}",
                    band.rows(),
                    band.cols()
                )));
            }
            data.extend_from_slice(band.data());
        }
        Self::new(rows, cols, bands.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// `(rows, cols, bands)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.bands)
    }

    pub fn band_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn norm(&self) -> Option<&[(f32, f32)]> {
        self.norm.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.norm.is_some()
    }

    /// Replaces the normalization metadata without touching the samples.
    pub fn set_norm(&mut self, norm: Option<Vec<(f32, f32)>>) -> Result<()> {
        let checked = Self::with_norm(1, 1, self.bands, vec![0.0; self.bands], norm)?;
        self.norm = checked.norm;
        Ok(())
    }

    pub fn band(&self, k: usize) -> &[f32] {
        let len = self.band_len();
        &self.data[k * len..(k + 1) * len]
    }

    pub fn band_mut(&mut self, k: usize) -> &mut [f32] {
        let len = self.band_len();
        &mut self.data[k * len..(k + 1) * len]
    }

    /// Owned copy of band `k`.
    pub fn band_plane(&self, k: usize) -> Band {
        Band {
            rows: self.rows,
            cols: self.cols,
            data: self.band(k).to_vec(),
        }
    }

    pub fn set_band(&mut self, k: usize, band: &Band) -> Result<()> {
        if band.dims() != (self.rows, self.cols) {
            return Err(Error::DimensionMismatch(format!(
                "band is {}x{}, cube is {}x{}",
                band.rows(),
                band.cols(),
                self.rows,
                self.cols
            )));
        }
        self.band_mut(k).copy_from_slice(band.data());
        Ok(())
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f32 {
        self.data[band * self.band_len() + row * self.cols + col]
    }

    /// Maps every band onto `[0, 1]` using its own min and max.
    ///
    /// A constant band maps to zeros and records `(min, min)`.
    pub fn normalize_per_band(&self) -> Result<HsiCube> {
        if self.norm.is_some() {
            return Err(Error::AlreadyNormalized);
        }
        let mut data = self.data.clone();
        let mut ranges = Vec::with_capacity(self.bands);
        let len = self.band_len();
        for band in data.chunks_exact_mut(len) {
            let (lo, hi) = band
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::NonFinite("band range during normalization".into()));
            }
            if hi > lo {
                let span = hi as f64 - lo as f64;
                for v in band.iter_mut() {
                    *v = ((*v as f64 - lo as f64) / span) as f32;
                }
                ranges.push((lo, hi));
            } else {
                band.fill(0.0);
                ranges.push((lo, lo));
            }
        }
        Ok(HsiCube {
            norm: Some(ranges),
            data,
            ..*self
        })
    }

    /// Inverse of [`normalize_per_band`](Self::normalize_per_band); the result carries no norm block.
    pub fn denormalize_per_band(&self) -> Result<HsiCube> {
        let ranges = self.norm.as_ref().ok_or(Error::MissingNormalization)?;
        let mut data = self.data.clone();
        for (band, &(lo, hi)) in data.chunks_exact_mut(self.band_len()).zip(ranges) {
            let span = hi as f64 - lo as f64;
            for v in band.iter_mut() {
                *v = (*v as f64 * span + lo as f64) as f32;
            }
        }
        Ok(HsiCube {
            norm: None,
            data,
            ..*self
        })
    }

    /// Maps raw samples through externally supplied per-band ranges.
    ///
    /// The result carries no norm block since the samples are not guaranteed
    /// to land in `[0, 1]`. Constant ranges map to zero.
    pub fn map_with_ranges(&self, ranges: &[(f32, f32)]) -> Result<HsiCube> {
        if ranges.len() != self.bands {
            return Err(Error::DimensionMismatch(format!(
                "{} ranges for {} bands",
                ranges.len(),
                self.bands
            )));
        }
        let mut data = self.data.clone();
        for (band, &(lo, hi)) in data.chunks_exact_mut(self.band_len()).zip(ranges) {
            let span = hi as f64 - lo as f64;
            for v in band.iter_mut() {
                *v = if span > 0.0 {
                    ((*v as f64 - lo as f64) / span) as f32
                } else {
                    0.0
                };
            }
        }
        Ok(HsiCube {
            norm: None,
            data,
            ..*self
        })
    }

    /// Gathers the given bands (in order) into a new cube of the same spatial size.
    pub fn select_bands(&self, indices: &[usize]) -> Result<HsiCube> {
        let mut data = Vec::with_capacity(indices.len() * self.band_len());
        for &k in indices {
            if k >= self.bands {
                return Err(Error::InvalidArgument(format!(
                    "band index {k} out of range for {} bands",
                    self.bands
                )));
            }
            data.extend_from_slice(self.band(k));
        }
        let norm = self
            .norm
            .as_ref()
            .map(|ranges| indices.iter().map(|&k| ranges[k]).collect());
        HsiCube::with_norm(self.rows, self.cols, indices.len(), data, norm)
    }

    /// Returns true when both cubes share `(rows, cols, bands)`.
    pub fn same_dims(&self, other: &HsiCube) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_same_dims(&self, other: &HsiCube) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims(),
                other.dims()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalize_maps_min_max_to_unit_interval() {
        let cube = HsiCube::new(1, 2, 1, vec![2.0, 4.0]).unwrap();
        let n = cube.normalize_per_band().unwrap();
        assert_eq!(n.data(), &[0.0, 1.0]);
        assert_eq!(n.norm().unwrap(), &[(2.0, 4.0)]);
    }

    #[test]
    fn constant_band_normalizes_to_zero() {
        let cube = HsiCube::new(1, 2, 1, vec![7.0, 7.0]).unwrap();
        let n = cube.normalize_per_band().unwrap();
        assert_eq!(n.data(), &[0.0, 0.0]);
        assert_eq!(n.norm().unwrap(), &[(7.0, 7.0)]);
        let back = n.denormalize_per_band().unwrap();
        assert_eq!(back.data(), &[7.0, 7.0]);
    }

    #[test]
    fn denormalize_examples() {
        let cube = HsiCube::with_norm(1, 2, 1, vec![1.0, 0.0], Some(vec![(2.0, 4.0)])).unwrap();
        let raw = cube.denormalize_per_band().unwrap();
        assert_eq!(raw.data(), &[4.0, 2.0]);
        assert!(raw.norm().is_none());
    }

    #[test]
    fn normalize_roundtrip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f32> = (0..6 * 5 * 4).map(|_| rng.random_range(-3.0..5.0)).collect();
        let cube = HsiCube::new(6, 5, 4, data).unwrap();
        let n = cube.normalize_per_band().unwrap();
        assert!(n.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let back = n.denormalize_per_band().unwrap();
        for (a, b) in cube.data().iter().zip(back.data()) {
            // 1e-6 relative to the band span of ~8
            assert!((a - b).abs() <= 8e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn double_normalization_is_rejected() {
        let cube = HsiCube::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let n = cube.normalize_per_band().unwrap();
        assert!(matches!(n.normalize_per_band(), Err(Error::AlreadyNormalized)));
        assert!(matches!(cube.denormalize_per_band(), Err(Error::MissingNormalization)));
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(matches!(HsiCube::new(0, 1, 1, vec![]), Err(Error::ZeroDimension(_))));
        assert!(matches!(
            HsiCube::new(2, 2, 1, vec![0.0; 3]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(HsiCube::with_norm(1, 1, 1, vec![0.0], Some(vec![(1.0, 0.0)])).is_err());
        assert!(HsiCube::with_norm(1, 1, 2, vec![0.0; 2], Some(vec![(0.0, 1.0)])).is_err());
    }

    #[test]
    fn band_sequential_layout() {
        let cube = HsiCube::new(2, 2, 2, (0..8).map(|v| v as f32).collect()).unwrap();
        assert_eq!(cube.band(1), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(cube.get(1, 0, 1), 6.0);
        let sub = cube.select_bands(&[1, 0]).unwrap();
        assert_eq!(sub.band(0), cube.band(1));
    }

    #[test]
    fn crop_extracts_window() {
        let band = Band::from_fn(4, 4, |r, c| (r * 4 + c) as f32);
        let w = band.crop(1, 2, 2, 2).unwrap();
        assert_eq!(w.data(), &[6.0, 7.0, 10.0, 11.0]);
        assert!(band.crop(3, 3, 2, 2).is_err());
    }
}
