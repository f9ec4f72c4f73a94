//! Sliding short-time windows and per-pixel Doppler power spectra.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SpectralCube;
use crate::stack::HologramStack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Apodization {
    #[default]
    None,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftPlan {
    pub n_win: usize,
    pub hop: usize,
    #[serde(default)]
    pub apodization: Apodization,
}

impl Default for StftPlan {
    fn default() -> Self {
        StftPlan {
            n_win: 512,
            hop: 256,
            apodization: Apodization::None,
        }
    }
}

impl StftPlan {
    pub fn new(n_win: usize, hop: usize) -> Self {
        StftPlan {
            n_win,
            hop,
            apodization: Apodization::None,
        }
    }

    pub fn validate(&self, nt: usize) -> Result<()> {
        if self.n_win == 0 || !self.n_win.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "n_win must be even and >= 2, got {}",
                self.n_win
            )));
        }
        if self.hop == 0 || self.hop > self.n_win {
            return Err(Error::InvalidParameter(format!(
                "hop must be in [1, n_win], got {}",
                self.hop
            )));
        }
        if nt < self.n_win {
            return Err(Error::StackShorterThanWindow {
                nt,
                n_win: self.n_win,
            });
        }
        Ok(())
    }

    pub fn window_count(&self, nt: usize) -> usize {
        if nt < self.n_win {
            0
        } else {
            (nt - self.n_win) / self.hop + 1
        }
    }

    pub fn t_center_s(&self, m: usize, sample_rate_hz: f64) -> f64 {
        (m * self.hop) as f64 / sample_rate_hz + self.n_win as f64 / 2.0 / sample_rate_hz
    }

    pub fn hop_s(&self, sample_rate_hz: f64) -> f64 {
        self.hop as f64 / sample_rate_hz
    }
}

/// One short-time window as a Casorati matrix: rows are pixels (raster
/// order), columns are frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub index: usize,
    pub start_frame: usize,
    pub t_center_s: f64,
    pub sample_rate_hz: f64,
    pub ny: usize,
    pub nx: usize,
    pub data: Array2<Complex64>,
}

impl Window {
    pub fn n_win(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_pixels(&self) -> usize {
        self.data.dim().0
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Per-pixel time-domain power as an image.
    pub fn pixel_energy(&self) -> Array2<f64> {
        let flat: Vec<f64> = self
            .data
            .axis_iter(Axis(0))
            .map(|row| row.iter().map(|v| v.norm_sqr()).sum())
            .collect();
        Array2::from_shape_vec((self.ny, self.nx), flat).expect("pixel count matches image")
    }
}

/// Lazily extracted windows over a hologram stack.
pub struct Windows<'a> {
    stack: &'a HologramStack,
    plan: StftPlan,
    next: usize,
    count: usize,
}

impl Iterator for Windows<'_> {
    type Item = Window;

    fn next(&mut self) -> Option<Window> {
        if self.next >= self.count {
            return None;
        }
        let w = extract_window(self.stack, &self.plan, self.next);
        self.next += 1;
        Some(w)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.count - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Windows<'_> {}

pub fn make_windows<'a>(stack: &'a HologramStack, plan: &StftPlan) -> Result<Windows<'a>> {
    plan.validate(stack.meta().nt)?;
    Ok(Windows {
        stack,
        plan: *plan,
        next: 0,
        count: plan.window_count(stack.meta().nt),
    })
}

pub fn extract_window(stack: &HologramStack, plan: &StftPlan, m: usize) -> Window {
    let meta = stack.meta();
    let start = m * plan.hop;
    let np = meta.n_pixels();
    let mut data = Array2::<Complex64>::zeros((np, plan.n_win));
    for t in 0..plan.n_win {
        let frame = stack.frame(start + t);
        for (p, v) in frame.iter().enumerate() {
            data[[p, t]] = Complex64::new(v.re as f64, v.im as f64);
        }
    }
    Window {
        index: m,
        start_frame: start,
        t_center_s: plan.t_center_s(m, meta.sample_rate_hz),
        sample_rate_hz: meta.sample_rate_hz,
        ny: meta.ny,
        nx: meta.nx,
        data,
    }
}

/// Periodic Hann taper.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Doppler power spectral density of a window: `|X[k]|^2` with `X` the
/// unitary (1/sqrt(N)) temporal DFT of each pixel's series.
pub fn dpsd(window: &Window, apodization: Apodization) -> Result<SpectralCube> {
    let n = window.n_win();
    let np = window.n_pixels();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let taper = match apodization {
        Apodization::None => None,
        Apodization::Hann => Some(hann(n)),
    };
    let scale = 1.0 / n as f64;
    let input = window
        .data
        .as_slice()
        .ok_or_else(|| Error::ShapeMismatch("window data must be contiguous".into()))?;

    let mut power = vec![0.0f64; np * n];
    power
        .par_chunks_mut(n)
        .zip(input.par_chunks(n))
        .for_each_init(
            || (vec![Complex64::default(); n], vec![Complex64::default(); fft.get_inplace_scratch_len()]),
            |(buf, scratch), (out, series)| {
                buf.copy_from_slice(series);
                if let Some(w) = &taper {
                    for (b, wi) in buf.iter_mut().zip(w) {
                        *b *= *wi;
                    }
                }
                fft.process_with_scratch(buf, scratch);
                for (o, x) in out.iter_mut().zip(buf.iter()) {
                    *o = x.norm_sqr() * scale;
                }
            },
        );
    let power = Array2::from_shape_vec((np, n), power).expect("sized above");
    SpectralCube::new(power, window.ny, window.nx, window.sample_rate_hz, window.t_center_s)
}

/// Unitary power spectrum of a single series.
pub fn series_dpsd(series: &[Complex64], apodization: Apodization) -> Vec<f64> {
    let n = series.len();
    let data = Array2::from_shape_vec((1, n), series.to_vec()).expect("1 x n");
    let w = Window {
        index: 0,
        start_frame: 0,
        t_center_s: 0.0,
        sample_rate_hz: 1.0,
        ny: 1,
        nx: 1,
        data,
    };
    let cube = dpsd(&w, apodization).expect("finite input");
    cube.pixel_spectrum(0, 0).to_vec()
}
