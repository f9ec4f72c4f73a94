//! Synthetic hologram stacks with known Doppler ground truth.

mod cardiac;
mod scene;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use ndarray::{Array2, Array3, Axis};
use num_complex::{Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

pub use cardiac::{cardiac_waveform, pulse_shape, DICROTIC_HEIGHT, DICROTIC_PHASE, SYSTOLIC_PHASE};
pub use scene::{BulkMotion, RegionKind, RegionParams, RegionShape, RegionTable, SceneSpec};

use crate::error::{Error, Result};
use crate::fft2::{fft2, ifft2, signed_index};
use crate::reconstruct::{CarrierSpec, Propagator};
use crate::stack::{FrameStack, HologramStack, StackMeta};

const PIXEL_BLOCK: usize = 64;

/// Everything the generator knew while producing a stack.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub scene: SceneSpec,
    pub sample_rate_hz: f64,
    pub labels: Array2<RegionKind>,
    pub reflectivity: Array2<f64>,
    pub t_s: Vec<f64>,
    /// Cardiac waveform without phase lag.
    pub cardiac: Vec<f64>,
    pub bulk_phase: Vec<f64>,
    /// Decorrelation time per region and frame.
    pub tau_c_s: BTreeMap<RegionKind, Vec<f64>>,
    pub noise_var: f64,
}

impl GroundTruth {
    pub fn nt(&self) -> usize {
        self.t_s.len()
    }

    pub fn region_mask(&self, kind: RegionKind) -> crate::model::RoiMask {
        crate::model::RoiMask::new(self.labels.mapv(|k| k == kind))
    }

    /// Decorrelation time of every pixel at frame `n`.
    pub fn tau_map(&self, n: usize) -> Array2<f64> {
        self.labels.mapv(|k| self.tau_c_s[&k][n])
    }

    /// Expected unitary periodogram of an `n_win` window for a stationary
    /// pixel of region `kind` at cardiac value `p`, noise included and bulk
    /// motion ignored. Bins in DFT order.
    pub fn analytic_spectrum(&self, kind: RegionKind, p: f64, n_win: usize) -> Vec<f64> {
        let r = self.scene.regions.get(kind).reflectivity;
        let tau = self.scene.tau_at(kind, p);
        let a = (-1.0 / (self.sample_rate_hz * tau)).exp();
        ar1_expected_periodogram(a, r * r, self.noise_var, n_win)
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Region {
            decorrelation_rate_hz: f64,
            linewidth_hz: f64,
            pulsatility: f64,
            phase_lag: f64,
            reflectivity: f64,
            pixels: usize,
        }
        let regions: BTreeMap<String, Region> = RegionKind::ALL
            .iter()
            .map(|&k| {
                let p = self.scene.regions.get(k);
                (
                    k.name().to_string(),
                    Region {
                        decorrelation_rate_hz: 1.0 / p.tau_c_s,
                        linewidth_hz: p.linewidth_hz(),
                        pulsatility: p.pulsatility,
                        phase_lag: p.phase_lag,
                        reflectivity: p.reflectivity,
                        pixels: self.labels.iter().filter(|&&l| l == k).count(),
                    },
                )
            })
            .collect();
        serde_json::json!({
            "nx": self.scene.nx,
            "ny": self.scene.ny,
            "nt": self.nt(),
            "sample_rate_hz": self.sample_rate_hz,
            "heart_rate_hz": self.scene.heart_rate_hz,
            "tau_ratio": self.scene.tau_ratio,
            "noise_snr_db": if self.scene.noise_snr_db.is_finite() { Some(self.scene.noise_snr_db) } else { None },
            "noise_var": self.noise_var,
            "seed": self.scene.seed,
            "bulk_motion": self.scene.bulk_motion,
            "defocus_m": self.scene.defocus_m,
            "aperture_cyc_per_px": self.scene.aperture_cyc_per_px,
            "regions": regions,
            "cardiac": self.cardiac,
            "bulk_phase": self.bulk_phase,
        })
    }

    /// Writes `<prefix>.truth.json`, `<prefix>.labels.u8` (region codes in
    /// `RegionKind::ALL` order) and `<prefix>.reflectivity.f32`, row-major
    /// little-endian. Returns the written paths.
    pub fn write(&self, prefix: &Path) -> Result<Vec<std::path::PathBuf>> {
        let with = |suffix: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(suffix);
            std::path::PathBuf::from(s)
        };
        let json_path = with(".truth.json");
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;

        let labels_path = with(".labels.u8");
        let codes: Vec<u8> = self
            .labels
            .iter()
            .map(|k| RegionKind::ALL.iter().position(|a| a == k).unwrap() as u8)
            .collect();
        std::fs::write(&labels_path, codes).map_err(|e| Error::io(&labels_path, e))?;

        let refl_path = with(".reflectivity.f32");
        let bytes: Vec<u8> = self.reflectivity.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        std::fs::write(&refl_path, bytes).map_err(|e| Error::io(&refl_path, e))?;
        Ok(vec![json_path, labels_path, refl_path])
    }
}

/// `E |X_k|^2` for an `n`-sample window of a stationary AR(1) process with
/// coefficient `a` and power `power`, plus white noise, unitary DFT.
pub fn ar1_expected_periodogram(a: f64, power: f64, noise_var: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let w = 2.0 * PI * k as f64 / n as f64;
            let mut s = 1.0;
            let mut am = 1.0;
            for m in 1..n {
                am *= a;
                s += 2.0 * (1.0 - m as f64 / n as f64) * am * (w * m as f64).cos();
            }
            power * s + noise_var
        })
        .collect()
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Generates `nt` frames of the scene's complex field at `sample_rate_hz`.
///
/// Each pixel draws from its own ChaCha8 stream (`seed`, stream = flat pixel
/// index), so the output does not depend on the thread count.
pub fn gen_field_stack(scene: &SceneSpec, sample_rate_hz: f64, nt: usize) -> Result<(HologramStack, GroundTruth)> {
    scene.validate()?;
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) || nt == 0 {
        return Err(Error::InvalidParameter(format!(
            "need sample_rate_hz > 0 and nt >= 1, got {sample_rate_hz} and {nt}"
        )));
    }
    let (ny, nx) = (scene.ny, scene.nx);
    let dt = 1.0 / sample_rate_hz;
    let t_s: Vec<f64> = (0..nt).map(|n| n as f64 * dt).collect();
    let hr = scene.heart_rate_hz;
    let cardiac = cardiac_waveform(hr, &t_s);
    let bulk_phase: Vec<f64> = t_s.iter().map(|&t| scene.bulk_motion.phase(hr, t)).collect();
    let bulk: Vec<Complex64> = bulk_phase.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();

    let mut tau_c_s = BTreeMap::new();
    let mut coeffs: BTreeMap<RegionKind, Vec<(f64, f64)>> = BTreeMap::new();
    for kind in RegionKind::ALL {
        let lag = scene.regions.get(kind).phase_lag;
        let taus: Vec<f64> = t_s
            .iter()
            .map(|&t| scene.tau_at(kind, pulse_shape(t * hr - lag)))
            .collect();
        let ab: Vec<(f64, f64)> = taus
            .iter()
            .map(|&tau| {
                let a = (-dt / tau).exp();
                (a, (1.0 - a * a).max(0.0).sqrt())
            })
            .collect();
        tau_c_s.insert(kind, taus);
        coeffs.insert(kind, ab);
    }

    let labels = scene.labels();
    let reflectivity = scene.reflectivity_map();
    let noise_var = scene.noise_variance();
    let noise_sd = noise_var.sqrt();
    let npix = ny * nx;

    // pixel-major while generating
    let mut series = Array2::<Complex32>::zeros((npix, nt));
    series
        .axis_chunks_iter_mut(Axis(0), PIXEL_BLOCK)
        .into_par_iter()
        .enumerate()
        .for_each(|(block, mut rows)| {
            for (i, mut row) in rows.axis_iter_mut(Axis(0)).enumerate() {
                let pix = block * PIXEL_BLOCK + i;
                let (y, x) = (pix / nx, pix % nx);
                let ab = &coeffs[&labels[[y, x]]];
                let r = reflectivity[[y, x]];
                let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
                rng.set_stream(pix as u64);
                let mut g = complex_normal(&mut rng);
                for n in 0..nt {
                    if n > 0 {
                        let (a, b) = ab[n];
                        let w = complex_normal(&mut rng);
                        g = g * a + w * b;
                    }
                    let noise = complex_normal(&mut rng) * noise_sd;
                    let h = g * bulk[n] * r + noise;
                    row[n] = Complex32::new(h.re as f32, h.im as f32);
                }
            }
        });

    let mut field = series
        .into_shape_with_order((ny, nx, nt))
        .expect("pixel-major buffer matches scene shape")
        .permuted_axes([2, 0, 1])
        .as_standard_layout()
        .into_owned();

    if scene.aperture_cyc_per_px.is_some() || scene.defocus_m != 0.0 {
        let prop = Propagator::new(scene.wavelength_m, scene.pixel_pitch_m)?;
        let aperture = scene.aperture_cyc_per_px;
        let results: Vec<Result<()>> = field
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .map(|mut frame| {
                let mut f = frame.mapv(|v| Complex64::new(v.re as f64, v.im as f64));
                if let Some(cut) = aperture {
                    apply_aperture(&mut f, cut);
                }
                if scene.defocus_m != 0.0 {
                    // The demodulated sideband is the conjugate field, so a
                    // camera field propagated by +d refocuses at z = +d.
                    f = prop.propagate(&f, scene.defocus_m)?;
                }
                frame.zip_mut_with(&f, |o, v| *o = Complex32::new(v.re as f32, v.im as f32));
                Ok(())
            })
            .collect();
        for (n, r) in results.into_iter().enumerate() {
            r.map_err(|e| e.in_frame(n))?;
        }
    }

    let mut meta = StackMeta::new(nx, ny, nt, sample_rate_hz);
    meta.wavelength_m = scene.wavelength_m;
    meta.pixel_pitch_m = scene.pixel_pitch_m;
    meta.origin_tag = format!("simulated:seed={}", scene.seed);
    let stack = HologramStack::new(meta, field)?;
    let truth = GroundTruth {
        scene: scene.clone(),
        sample_rate_hz,
        labels,
        reflectivity,
        t_s,
        cardiac,
        bulk_phase,
        tau_c_s,
        noise_var,
    };
    Ok((stack, truth))
}

fn apply_aperture(f: &mut Array2<Complex64>, cut: f64) {
    let (ny, nx) = f.dim();
    fft2(f);
    for ((v, u), val) in f.indexed_iter_mut() {
        let fy = signed_index(v, ny) as f64 / ny as f64;
        let fx = signed_index(u, nx) as f64 / nx as f64;
        if fx.abs() > cut + 1e-12 || fy.abs() > cut + 1e-12 {
            *val = Complex64::new(0.0, 0.0);
        }
    }
    ifft2(f);
}

/// Averages consecutive groups of `factor` frames, emulating a camera whose
/// exposure spans the longer frame period.
pub fn integrate_decimate(stack: &HologramStack, factor: usize) -> Result<HologramStack> {
    let meta = stack.meta();
    if factor == 0 || !meta.nt.is_multiple_of(factor) {
        return Err(Error::InvalidParameter(format!(
            "decimation factor {factor} does not divide nt = {}",
            meta.nt
        )));
    }
    if factor == 1 {
        return Ok(stack.clone());
    }
    let mt = meta.nt / factor;
    let src = stack.field();
    let mut out = Array3::<Complex32>::zeros((mt, meta.ny, meta.nx));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(m, mut frame)| {
            let mut acc = Array2::<Complex64>::zeros((meta.ny, meta.nx));
            for n in m * factor..(m + 1) * factor {
                acc.zip_mut_with(&src.index_axis(Axis(0), n), |a, v| {
                    *a += Complex64::new(v.re as f64, v.im as f64)
                });
            }
            let inv = 1.0 / factor as f64;
            frame.zip_mut_with(&acc, |o, a| {
                *o = Complex32::new((a.re * inv) as f32, (a.im * inv) as f32)
            });
        });
    let mut new_meta = meta.clone();
    new_meta.nt = mt;
    new_meta.sample_rate_hz = meta.sample_rate_hz / factor as f64;
    new_meta.exposure_s = meta.exposure_s * factor as f64;
    HologramStack::new(new_meta, out)
}

/// Interferograms `|O + R|^2` with the tilted reference
/// `R = ref_amplitude * exp(i 2 pi (kx x + ky y))`.
pub fn render_interferograms(stack: &HologramStack, carrier: &CarrierSpec, ref_amplitude: f64) -> Result<FrameStack> {
    carrier.validate()?;
    if !(ref_amplitude > 0.0 && ref_amplitude.is_finite()) {
        return Err(Error::InvalidParameter(format!("ref_amplitude must be > 0, got {ref_amplitude}")));
    }
    let meta = stack.meta().clone();
    let reference = Array2::from_shape_fn((meta.ny, meta.nx), |(y, x)| {
        let ph = 2.0 * PI * (carrier.kx_cyc_per_px * x as f64 + carrier.ky_cyc_per_px * y as f64);
        Complex64::from_polar(ref_amplitude, ph)
    });
    let src = stack.field();
    let mut out = Array3::<f32>::zeros((meta.nt, meta.ny, meta.nx));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(n, mut frame)| {
            let obj = src.index_axis(Axis(0), n);
            for ((o, h), r) in frame.iter_mut().zip(obj.iter()).zip(reference.iter()) {
                let s = Complex64::new(h.re as f64, h.im as f64) + r;
                *o = s.norm_sqr() as f32;
            }
        });
    FrameStack::new(meta, out)
}
