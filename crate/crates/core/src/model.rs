//! Spectral and power Doppler data model.

use std::ops::Range;

use ndarray::{Array2, Array3, ArrayView1, ArrayView2, Axis};

use crate::band::{bin_frequency, Band};
use crate::error::{Error, Result};

/// Doppler power spectral density of one short-time window.
///
/// Logically indexed `(f_bin, y, x)`; stored pixel-major as `(y * nx + x, f_bin)`
/// because every consumer reduces along frequency per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    nbins: usize,
    sample_rate_hz: f64,
    ny: usize,
    nx: usize,
    power: Array2<f64>,
    t_center_s: f64,
}

impl SpectralCube {
    pub fn new(
        power: Array2<f64>,
        ny: usize,
        nx: usize,
        sample_rate_hz: f64,
        t_center_s: f64,
    ) -> Result<Self> {
        let (np, nbins) = power.dim();
        if np != ny * nx {
            return Err(Error::ShapeMismatch(format!(
                "{np} pixel rows for a {ny}x{nx} image"
            )));
        }
        if power.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "spectral power must be finite and >= 0".into(),
            ));
        }
        Ok(SpectralCube {
            nbins,
            sample_rate_hz,
            ny,
            nx,
            power,
            t_center_s,
        })
    }

    pub fn nbins(&self) -> usize {
        self.nbins
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn t_center_s(&self) -> f64 {
        self.t_center_s
    }

    pub fn power_at(&self, k: usize, y: usize, x: usize) -> f64 {
        self.power[[y * self.nx + x, k]]
    }

    /// Pixel-major `(pixel, bin)` view.
    pub fn power(&self) -> ArrayView2<'_, f64> {
        self.power.view()
    }

    pub fn pixel_spectrum(&self, y: usize, x: usize) -> ArrayView1<'_, f64> {
        self.power.row(y * self.nx + x)
    }

    pub fn frequency(&self, k: usize) -> f64 {
        bin_frequency(k, self.nbins, self.sample_rate_hz)
    }

    /// Per-pixel sum of the given bins, as a `(ny, nx)` image.
    pub fn sum_bins(&self, bins: &[usize]) -> Array2<f64> {
        let flat: Vec<f64> = self
            .power
            .axis_iter(Axis(0))
            .map(|row| bins.iter().map(|&k| row[k]).sum())
            .collect();
        Array2::from_shape_vec((self.ny, self.nx), flat).expect("pixel count checked at construction")
    }
}

/// Time series of band-integrated power Doppler frames, indexed `(n, y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDopplerMovie {
    frames: Array3<f64>,
    t_center_s: Vec<f64>,
    hop_s: f64,
    band: Band,
    rc: bool,
    baseline_removed: bool,
}

impl PowerDopplerMovie {
    /// A standard-polarity movie; values must be non-negative.
    pub fn new(frames: Array3<f64>, t_center_s: Vec<f64>, hop_s: f64, band: Band) -> Result<Self> {
        if frames.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "power Doppler values must be finite and >= 0".into(),
            ));
        }
        Self::from_parts(frames, t_center_s, hop_s, band, false, false)
    }

    pub(crate) fn from_parts(
        frames: Array3<f64>,
        t_center_s: Vec<f64>,
        hop_s: f64,
        band: Band,
        rc: bool,
        baseline_removed: bool,
    ) -> Result<Self> {
        if !(hop_s > 0.0) {
            return Err(Error::InvalidParameter(format!("hop_s must be > 0, got {hop_s}")));
        }
        if t_center_s.len() != frames.dim().0 {
            return Err(Error::ShapeMismatch(format!(
                "{} window times for {} frames",
                t_center_s.len(),
                frames.dim().0
            )));
        }
        Ok(PowerDopplerMovie {
            frames,
            t_center_s,
            hop_s,
            band,
            rc,
            baseline_removed,
        })
    }

    pub fn frames(&self) -> &Array3<f64> {
        &self.frames
    }

    pub fn frame(&self, n: usize) -> ArrayView2<'_, f64> {
        self.frames.index_axis(Axis(0), n)
    }

    pub fn n_windows(&self) -> usize {
        self.frames.dim().0
    }

    pub fn dims(&self) -> (usize, usize) {
        let (_, ny, nx) = self.frames.dim();
        (ny, nx)
    }

    pub fn times(&self) -> &[f64] {
        &self.t_center_s
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn is_rc(&self) -> bool {
        self.rc
    }

    pub fn is_baseline_removed(&self) -> bool {
        self.baseline_removed
    }

    /// Temporal mean image.
    pub fn mean_image(&self) -> Array2<f64> {
        self.frames
            .mean_axis(Axis(0))
            .expect("movie has at least one window")
    }

    pub(crate) fn with_frames(&self, frames: Array3<f64>) -> Self {
        PowerDopplerMovie {
            frames,
            ..self.clone()
        }
    }

    pub(crate) fn set_flags(mut self, rc: bool, baseline_removed: bool) -> Self {
        self.rc = rc;
        self.baseline_removed = baseline_removed;
        self
    }
}

/// Boolean region of interest, indexed `(y, x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    mask: Array2<bool>,
}

impl RoiMask {
    pub fn new(mask: Array2<bool>) -> Self {
        RoiMask { mask }
    }

    pub fn rect(ny: usize, nx: usize, rows: Range<usize>, cols: Range<usize>) -> Self {
        let mask = Array2::from_shape_fn((ny, nx), |(y, x)| rows.contains(&y) && cols.contains(&x));
        RoiMask { mask }
    }

    pub fn full(ny: usize, nx: usize) -> Self {
        RoiMask {
            mask: Array2::from_elem((ny, nx), true),
        }
    }

    pub fn single(ny: usize, nx: usize, y: usize, x: usize) -> Self {
        Self::rect(ny, nx, y..y + 1, x..x + 1)
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Flat pixel indices (`y * nx + x`) of the true pixels, in raster order.
    pub fn pixel_indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub(crate) fn require_non_empty(&self) -> Result<()> {
        if self.count() == 0 {
            Err(Error::EmptyMask)
        } else {
            Ok(())
        }
    }

    pub fn intersect(&self, other: &RoiMask) -> RoiMask {
        let mut mask = self.mask.clone();
        mask.zip_mut_with(&other.mask, |a, &b| *a = *a && b);
        RoiMask { mask }
    }

    /// Grows the mask by `r` pixels (square structuring element).
    pub fn dilate(&self, r: usize) -> RoiMask {
        let (ny, nx) = self.mask.dim();
        let mask = Array2::from_shape_fn((ny, nx), |(y, x)| {
            let y0 = y.saturating_sub(r);
            let x0 = x.saturating_sub(r);
            (y0..(y + r + 1).min(ny)).any(|yy| (x0..(x + r + 1).min(nx)).any(|xx| self.mask[[yy, xx]]))
        });
        RoiMask { mask }
    }
}
