//! Browser bindings for three small ldh-core operations: scene panels,
//! analytic band powers for a decorrelation time, and the measured
//! frame-integration response.

use ldh_core::band::bin_frequency;
use ldh_core::composite::{compose_low_high, to_grayscale, RenderSpec};
use ldh_core::doppler::{power_doppler, reverse_contrast};
use ldh_core::pipeline::spectral_cubes;
use ldh_core::simulator::{ar1_expected_periodogram, gen_field_stack, integrate_decimate, SceneSpec};
use ldh_core::{band_bins, Apodization, Band, HologramStack, Result, StackMeta, StftPlan, SvdFilterSpec};
use ndarray::{Array2, Array3};
use num_complex::Complex32;
use wasm_bindgen::prelude::*;

pub const SAMPLE_RATE_HZ: f64 = 64_000.0;
const PANEL_WINDOW: usize = 256;

/// Four RGBA panels of the default scene, each `nx * ny * 4` bytes.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Panels {
    nx: usize,
    ny: usize,
    rc_low: Vec<u8>,
    high: Vec<u8>,
    full: Vec<u8>,
    composite: Vec<u8>,
}

#[wasm_bindgen]
impl Panels {
    #[wasm_bindgen(getter)]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[wasm_bindgen(getter)]
    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Reverse-contrast 0.2-1 kHz mean image.
    pub fn rc_low(&self) -> Vec<u8> {
        self.rc_low.clone()
    }

    /// 6 kHz-Nyquist mean image.
    pub fn high(&self) -> Vec<u8> {
        self.high.clone()
    }

    pub fn full(&self) -> Vec<u8> {
        self.full.clone()
    }

    /// Red: reverse-contrast 0.2-1 kHz; green and blue: 1-6 kHz.
    pub fn composite(&self) -> Vec<u8> {
        self.composite.clone()
    }
}

fn gray_rgba(img: &Array2<u8>) -> Vec<u8> {
    img.iter().flat_map(|&v| [v, v, v, 255]).collect()
}

fn rgb_rgba(img: &Array3<u8>) -> Vec<u8> {
    img.outer_iter()
        .flat_map(|row| row.outer_iter().map(|px| [px[0], px[1], px[2], 255]).collect::<Vec<_>>())
        .flatten()
        .collect()
}

/// Simulates the default scene and renders its band panels.
pub fn scene_panels(seed: u64, nt: usize, absorber: bool, svd_cutoff_hz: f64) -> Result<Panels> {
    let mut scene = SceneSpec {
        seed,
        ..SceneSpec::default()
    };
    if !absorber {
        scene = scene.with_uniform_reflectivity();
    }
    let (stack, _) = gen_field_stack(&scene, SAMPLE_RATE_HZ, nt)?;
    let plan = StftPlan::new(PANEL_WINDOW, PANEL_WINDOW / 2);
    let svd = SvdFilterSpec {
        cutoff_hz: svd_cutoff_hz,
        rank_override: None,
    };
    let cubes = spectral_cubes(&stack, &plan, Some(svd), Apodization::None)?;
    let hop_s = plan.hop_s(SAMPLE_RATE_HZ);
    let mean = |band: Band| power_doppler(&cubes, band, hop_s);

    let low = mean(Band::new(200.0, 1000.0)?)?;
    let rc_low = reverse_contrast(&low)?.mean_image();
    let high = mean(Band::to_nyquist(6000.0, SAMPLE_RATE_HZ)?)?.mean_image();
    let full = mean(Band::full(SAMPLE_RATE_HZ))?.mean_image();
    let mid = mean(Band::new(1000.0, 6000.0)?)?.mean_image();

    let spec = RenderSpec::default();
    Ok(Panels {
        nx: scene.nx,
        ny: scene.ny,
        rc_low: gray_rgba(&to_grayscale(&rc_low, &spec)?),
        high: gray_rgba(&to_grayscale(&high, &spec)?),
        full: gray_rgba(&to_grayscale(&full, &spec)?),
        composite: rgb_rgba(&compose_low_high(&mid, &rc_low, &spec)?),
    })
}

/// Expected DPSD of an AR(1) speckle pixel, `[freqs..., powers...]` in
/// ascending frequency.
pub fn ar1_spectrum(tau_c_s: f64, sample_rate_hz: f64, n_win: usize, snr_db: f64) -> Vec<f64> {
    let a = (-1.0 / (sample_rate_hz * tau_c_s)).exp();
    let noise = 10f64.powf(-snr_db / 10.0);
    let p = ar1_expected_periodogram(a, 1.0, noise, n_win);
    let mut idx: Vec<usize> = (0..n_win).collect();
    idx.sort_by(|&x, &y| bin_frequency(x, n_win, sample_rate_hz).total_cmp(&bin_frequency(y, n_win, sample_rate_hz)));
    let mut out: Vec<f64> = idx.iter().map(|&k| bin_frequency(k, n_win, sample_rate_hz)).collect();
    out.extend(idx.iter().map(|&k| p[k]));
    out
}

/// Fractions of total power in 0.2-1 kHz, 0.2-4 kHz and 6 kHz-Nyquist.
pub fn band_fractions(tau_c_s: f64, sample_rate_hz: f64, n_win: usize, snr_db: f64) -> Result<Vec<f64>> {
    let a = (-1.0 / (sample_rate_hz * tau_c_s)).exp();
    let p = ar1_expected_periodogram(a, 1.0, 10f64.powf(-snr_db / 10.0), n_win);
    let total: f64 = p.iter().sum();
    [
        Band::new(200.0, 1000.0)?,
        Band::new(200.0, 4000.0)?,
        Band::to_nyquist(6000.0, sample_rate_hz)?,
    ]
    .iter()
    .map(|b| Ok(band_bins(b, n_win, sample_rate_hz)?.iter().map(|&k| p[k]).sum::<f64>() / total))
    .collect()
}

/// Amplitude of a unit complex tone after frame integration by `factor`,
/// for `n` tone frequencies evenly spaced in (0, fs/2]. Returns
/// `[freqs..., measured..., dirichlet...]`.
pub fn decimation_response(factor: usize, sample_rate_hz: f64, n: usize) -> Result<Vec<f64>> {
    let freqs: Vec<f64> = (1..=n).map(|i| sample_rate_hz / 2.0 * i as f64 / n as f64).collect();
    let mut measured = Vec::with_capacity(n);
    for &f in &freqs {
        let nt = factor * 4;
        let field = Array3::from_shape_fn((nt, 1, 1), |(t, _, _)| {
            let ph = 2.0 * std::f64::consts::PI * f * t as f64 / sample_rate_hz;
            Complex32::new(ph.cos() as f32, ph.sin() as f32)
        });
        let st = HologramStack::new(StackMeta::new(1, 1, nt, sample_rate_hz), field)?;
        let d = integrate_decimate(&st, factor)?;
        measured.push(d.field()[[0, 0, 0]].norm() as f64);
    }
    let dirichlet = freqs.iter().map(|&f| dirichlet(f / sample_rate_hz, factor));
    Ok(freqs.iter().copied().chain(measured).chain(dirichlet).collect())
}

/// `|sin(pi N x) / (N sin(pi x))|` with `x = f / fs`.
pub fn dirichlet(x: f64, n: usize) -> f64 {
    let den = n as f64 * (std::f64::consts::PI * x).sin();
    if den.abs() < 1e-15 {
        1.0
    } else {
        ((std::f64::consts::PI * x * n as f64).sin() / den).abs()
    }
}

fn js_err(e: ldh_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = scenePanels)]
pub fn scene_panels_js(seed: u32, nt: usize, absorber: bool, svd_cutoff_hz: f64) -> std::result::Result<Panels, JsError> {
    scene_panels(seed as u64, nt, absorber, svd_cutoff_hz).map_err(js_err)
}

#[wasm_bindgen(js_name = ar1Spectrum)]
pub fn ar1_spectrum_js(tau_c_s: f64, sample_rate_hz: f64, n_win: usize, snr_db: f64) -> Vec<f64> {
    ar1_spectrum(tau_c_s, sample_rate_hz, n_win, snr_db)
}

#[wasm_bindgen(js_name = bandFractions)]
pub fn band_fractions_js(tau_c_s: f64, sample_rate_hz: f64, n_win: usize, snr_db: f64) -> std::result::Result<Vec<f64>, JsError> {
    band_fractions(tau_c_s, sample_rate_hz, n_win, snr_db).map_err(js_err)
}

#[wasm_bindgen(js_name = decimationResponse)]
pub fn decimation_response_js(factor: usize, sample_rate_hz: f64, n: usize) -> std::result::Result<Vec<f64>, JsError> {
    decimation_response(factor, sample_rate_hz, n).map_err(js_err)
}
