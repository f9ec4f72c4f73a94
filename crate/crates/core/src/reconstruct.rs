//! Off-axis demodulation and angular spectrum propagation.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use num_complex::{Complex32, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft2::{fft2, ifft2, signed_index};
use crate::stack::{FrameStack, HologramStack};

/// Off-axis carrier and the half-width of the square selection window,
/// all in cycles per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    pub kx_cyc_per_px: f64,
    pub ky_cyc_per_px: f64,
    pub halfwidth_cyc_per_px: f64,
}

impl CarrierSpec {
    pub fn new(kx: f64, ky: f64, halfwidth: f64) -> Result<Self> {
        let c = CarrierSpec {
            kx_cyc_per_px: kx,
            ky_cyc_per_px: ky,
            halfwidth_cyc_per_px: halfwidth,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let (kx, ky, hw) = (self.kx_cyc_per_px, self.ky_cyc_per_px, self.halfwidth_cyc_per_px);
        if !(hw > 0.0) || !kx.is_finite() || !ky.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "carrier needs finite frequencies and halfwidth > 0, got ({kx}, {ky}, {hw})"
            )));
        }
        if kx.abs() > 0.5 || ky.abs() > 0.5 || kx.abs() + hw > 0.5 || ky.abs() + hw > 0.5 {
            return Err(Error::CarrierOutOfRange(format!(
                "window of half-width {hw} around ({kx}, {ky}) leaves the Nyquist square"
            )));
        }
        Ok(())
    }
}

/// Selects the square spectral window around the carrier, moves it to zero
/// frequency and returns the inverse transform. The carrier is snapped to
/// the nearest DFT bin.
pub fn demodulate_offaxis(frame: ArrayView2<'_, f32>, carrier: &CarrierSpec) -> Result<Array2<Complex64>> {
    carrier.validate()?;
    let (ny, nx) = frame.dim();
    let mut spec = frame.mapv(|v| Complex64::new(v as f64, 0.0));
    fft2(&mut spec);

    let cx = (carrier.kx_cyc_per_px * nx as f64).round() as isize;
    let cy = (carrier.ky_cyc_per_px * ny as f64).round() as isize;
    let hx = carrier.halfwidth_cyc_per_px * nx as f64 + 1e-9;
    let hy = carrier.halfwidth_cyc_per_px * ny as f64 + 1e-9;

    let mut out = Array2::<Complex64>::zeros((ny, nx));
    for v in 0..ny {
        let sv = signed_index(v, ny);
        if (sv as f64).abs() > hy {
            continue;
        }
        let src_v = (sv + cy).rem_euclid(ny as isize) as usize;
        for u in 0..nx {
            let su = signed_index(u, nx);
            if (su as f64).abs() > hx {
                continue;
            }
            let src_u = (su + cx).rem_euclid(nx as isize) as usize;
            out[[v, u]] = spec[[src_v, src_u]];
        }
    }
    ifft2(&mut out);
    Ok(out)
}

/// Free-space propagation by the angular spectrum method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Propagator {
    pub wavelength_m: f64,
    pub pixel_pitch_m: f64,
    /// Zero-pad each axis to the next power of two before transforming.
    pub pad_pow2: bool,
}

impl Propagator {
    pub fn new(wavelength_m: f64, pixel_pitch_m: f64) -> Result<Self> {
        if !(wavelength_m > 0.0 && pixel_pitch_m > 0.0) {
            return Err(Error::InvalidParameter(
                "wavelength and pixel pitch must be positive".into(),
            ));
        }
        Ok(Propagator {
            wavelength_m,
            pixel_pitch_m,
            pad_pow2: false,
        })
    }

    pub fn with_padding(mut self, pad_pow2: bool) -> Self {
        self.pad_pow2 = pad_pow2;
        self
    }

    pub fn propagate(&self, field: &Array2<Complex64>, z_m: f64) -> Result<Array2<Complex64>> {
        if field.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidParameter("field contains non-finite values".into()));
        }
        if z_m == 0.0 {
            return Ok(field.clone());
        }
        let (ny, nx) = field.dim();
        if !self.pad_pow2 {
            let mut work = field.clone();
            self.apply_transfer(&mut work, z_m);
            return Ok(work);
        }
        let (py, px) = (ny.next_power_of_two(), nx.next_power_of_two());
        let mut work = Array2::<Complex64>::zeros((py, px));
        work.slice_mut(ndarray::s![..ny, ..nx]).assign(field);
        self.apply_transfer(&mut work, z_m);
        Ok(work.slice(ndarray::s![..ny, ..nx]).to_owned())
    }

    fn apply_transfer(&self, work: &mut Array2<Complex64>, z_m: f64) {
        let (ny, nx) = work.dim();
        let k = 2.0 * PI / self.wavelength_m;
        let k2 = k * k;
        fft2(work);
        for ((v, u), val) in work.indexed_iter_mut() {
            let kx = 2.0 * PI * signed_index(u, nx) as f64 / (nx as f64 * self.pixel_pitch_m);
            let ky = 2.0 * PI * signed_index(v, ny) as f64 / (ny as f64 * self.pixel_pitch_m);
            let kz2 = k2 - kx * kx - ky * ky;
            if kz2 < 0.0 {
                // evanescent
                *val = Complex64::new(0.0, 0.0);
            } else {
                *val *= Complex64::from_polar(1.0, z_m * kz2.sqrt());
            }
        }
        ifft2(work);
    }
}

pub fn angular_spectrum_propagate(
    field: &Array2<Complex64>,
    z_m: f64,
    wavelength_m: f64,
    pixel_pitch_m: f64,
) -> Result<Array2<Complex64>> {
    Propagator::new(wavelength_m, pixel_pitch_m)?.propagate(field, z_m)
}

/// Demodulates then propagates every frame; metadata is preserved.
pub fn reconstruct_stack(frames: &FrameStack, carrier: &CarrierSpec, z_m: f64) -> Result<HologramStack> {
    carrier.validate()?;
    let meta = frames.meta().clone();
    let prop = Propagator::new(meta.wavelength_m, meta.pixel_pitch_m)?;
    let out: Vec<Array2<Complex64>> = (0..meta.nt)
        .into_par_iter()
        .map(|t| {
            demodulate_offaxis(frames.frame(t), carrier)
                .and_then(|d| prop.propagate(&d, z_m))
                .map_err(|e| e.in_frame(t))
        })
        .collect::<Result<_>>()?;

    let mut field = Array3::<Complex32>::zeros((meta.nt, meta.ny, meta.nx));
    for (mut dst, src) in field.axis_iter_mut(Axis(0)).zip(out.iter()) {
        dst.zip_mut_with(src, |d, s| *d = Complex32::new(s.re as f32, s.im as f32));
    }
    HologramStack::new(meta, field)
}
