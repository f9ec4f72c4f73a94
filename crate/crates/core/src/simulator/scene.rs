use std::f64::consts::PI;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RoiMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Tissue,
    Artery,
    Vein,
    Static,
    Absorber,
}

impl RegionKind {
    pub const ALL: [RegionKind; 5] = [
        RegionKind::Tissue,
        RegionKind::Artery,
        RegionKind::Vein,
        RegionKind::Static,
        RegionKind::Absorber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegionKind::Tissue => "tissue",
            RegionKind::Artery => "artery",
            RegionKind::Vein => "vein",
            RegionKind::Static => "static",
            RegionKind::Absorber => "absorber",
        }
    }
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dynamics and optics of one region class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionParams {
    /// Baseline (diastolic) decorrelation time; `inf` freezes the speckle.
    pub tau_c_s: f64,
    /// Modulation depth of the decorrelation rate, in [0, 1).
    pub pulsatility: f64,
    /// Pulse delay as a fraction of the cardiac cycle.
    #[serde(default)]
    pub phase_lag: f64,
    /// Field amplitude.
    pub reflectivity: f64,
}

impl RegionParams {
    pub const fn new(tau_c_s: f64, pulsatility: f64, phase_lag: f64, reflectivity: f64) -> Self {
        RegionParams {
            tau_c_s,
            pulsatility,
            phase_lag,
            reflectivity,
        }
    }

    /// Lorentzian half-width `1 / (2 pi tau_c)` of the baseline spectrum.
    pub fn linewidth_hz(&self) -> f64 {
        1.0 / (2.0 * PI * self.tau_c_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionTable {
    pub tissue: RegionParams,
    pub artery: RegionParams,
    pub vein: RegionParams,
    #[serde(rename = "static")]
    pub static_region: RegionParams,
    pub absorber: RegionParams,
}

impl Default for RegionTable {
    fn default() -> Self {
        RegionTable {
            tissue: RegionParams::new(1.0e-3, 0.05, 0.0, 1.0),
            artery: RegionParams::new(6.4e-5, 0.8, 0.0, 1.0),
            vein: RegionParams::new(1.6e-4, 0.3, 0.1, 1.0),
            static_region: RegionParams::new(f64::INFINITY, 0.0, 0.0, 1.0),
            absorber: RegionParams::new(1.0e-3, 0.05, 0.0, 0.25),
        }
    }
}

impl RegionTable {
    pub fn get(&self, kind: RegionKind) -> &RegionParams {
        match kind {
            RegionKind::Tissue => &self.tissue,
            RegionKind::Artery => &self.artery,
            RegionKind::Vein => &self.vein,
            RegionKind::Static => &self.static_region,
            RegionKind::Absorber => &self.absorber,
        }
    }

    pub fn get_mut(&mut self, kind: RegionKind) -> &mut RegionParams {
        match kind {
            RegionKind::Tissue => &mut self.tissue,
            RegionKind::Artery => &mut self.artery,
            RegionKind::Vein => &mut self.vein,
            RegionKind::Static => &mut self.static_region,
            RegionKind::Absorber => &mut self.absorber,
        }
    }
}

/// Half-open pixel rectangle painted with one region class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionShape {
    pub kind: RegionKind,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl RegionShape {
    pub fn rect(kind: RegionKind, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        RegionShape { kind, x0, y0, x1, y1 }
    }
}

/// Bulk (eye) motion phase `A * sum_h c_h sin(2 pi h f_hr t + 0.7 h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BulkMotion {
    pub amplitude_rad: f64,
    pub harmonics: Vec<f64>,
}

impl Default for BulkMotion {
    fn default() -> Self {
        BulkMotion {
            amplitude_rad: 0.0,
            harmonics: vec![1.0, 0.35, 0.15],
        }
    }
}

impl BulkMotion {
    pub fn phase(&self, heart_rate_hz: f64, t: f64) -> f64 {
        if self.amplitude_rad == 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .harmonics
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let h = (i + 1) as f64;
                c * (2.0 * PI * h * heart_rate_hz * t + 0.7 * h).sin()
            })
            .sum();
        self.amplitude_rad * s
    }
}

/// Complete description of a synthetic scene. Fields missing from a config
/// take their `Default` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub nx: usize,
    pub ny: usize,
    pub heart_rate_hz: f64,
    /// Full systole at unit pulsatility divides tau_c by this ratio.
    pub tau_ratio: f64,
    /// Noise power relative to unit-reflectivity signal power, in dB;
    /// `inf` disables noise.
    pub noise_snr_db: f64,
    pub seed: u64,
    pub bulk_motion: BulkMotion,
    pub regions: RegionTable,
    /// Painted over a tissue background, in order.
    pub layout: Vec<RegionShape>,
    /// Square spatial low-pass applied to every frame, cycles/pixel.
    pub aperture_cyc_per_px: Option<f64>,
    /// Reconstruction distance that brings the scene back into focus.
    pub defocus_m: f64,
    pub wavelength_m: f64,
    pub pixel_pitch_m: f64,
}

impl Default for SceneSpec {
    /// 64x64 scene: artery and vein bands on a tissue background with one
    /// absorbing patch.
    fn default() -> Self {
        SceneSpec {
            nx: 64,
            ny: 64,
            heart_rate_hz: 15.625,
            tau_ratio: 3.0,
            noise_snr_db: 20.0,
            seed: 1,
            bulk_motion: BulkMotion::default(),
            regions: RegionTable::default(),
            layout: vec![
                RegionShape::rect(RegionKind::Artery, 12, 0, 20, 64),
                RegionShape::rect(RegionKind::Vein, 34, 0, 42, 64),
                RegionShape::rect(RegionKind::Absorber, 48, 36, 60, 48),
            ],
            aperture_cyc_per_px: None,
            defocus_m: 0.0,
            wavelength_m: 785e-9,
            pixel_pitch_m: 20e-6,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.nx == 0 || self.ny == 0 {
            return bad(format!("scene dimensions must be >= 1, got {}x{}", self.nx, self.ny));
        }
        if !(self.heart_rate_hz > 0.0 && self.heart_rate_hz.is_finite()) {
            return bad(format!("heart_rate_hz must be > 0, got {}", self.heart_rate_hz));
        }
        if !(self.tau_ratio >= 1.0 && self.tau_ratio.is_finite()) {
            return bad(format!("tau_ratio must be >= 1, got {}", self.tau_ratio));
        }
        if self.noise_snr_db.is_nan() {
            return bad("noise_snr_db must be a number".into());
        }
        if !self.bulk_motion.amplitude_rad.is_finite() || self.bulk_motion.harmonics.iter().any(|c| !c.is_finite()) {
            return bad("bulk_motion values must be finite".into());
        }
        for kind in RegionKind::ALL {
            let p = self.regions.get(kind);
            if !(p.tau_c_s > 0.0) {
                return bad(format!("{kind}.tau_c_s = {} must be > 0", p.tau_c_s));
            }
            if !(0.0..1.0).contains(&p.pulsatility) {
                return bad(format!("{kind}.pulsatility = {} must be in [0, 1)", p.pulsatility));
            }
            if !(p.reflectivity >= 0.0 && p.reflectivity.is_finite()) {
                return bad(format!("{kind}.reflectivity = {} must be >= 0", p.reflectivity));
            }
            if !p.phase_lag.is_finite() {
                return bad(format!("{kind}.phase_lag must be finite"));
            }
        }
        let has_absorber = self.layout.iter().any(|s| s.kind == RegionKind::Absorber);
        if has_absorber && !(self.regions.absorber.reflectivity < self.regions.tissue.reflectivity) {
            return bad(format!(
                "absorber.reflectivity = {} must be below tissue.reflectivity = {}",
                self.regions.absorber.reflectivity, self.regions.tissue.reflectivity
            ));
        }
        for (i, s) in self.layout.iter().enumerate() {
            if !(s.x0 < s.x1 && s.y0 < s.y1 && s.x1 <= self.nx && s.y1 <= self.ny) {
                return bad(format!(
                    "layout[{i}] ({}) rectangle [{}, {}) x [{}, {}) is empty or outside {}x{}",
                    s.kind, s.x0, s.x1, s.y0, s.y1, self.nx, self.ny
                ));
            }
        }
        if let Some(a) = self.aperture_cyc_per_px {
            if !(a > 0.0 && a <= 0.5) {
                return bad(format!("aperture_cyc_per_px = {a} must be in (0, 0.5]"));
            }
        }
        if !self.defocus_m.is_finite() || !(self.wavelength_m > 0.0) || !(self.pixel_pitch_m > 0.0) {
            return bad("optics parameters must be finite and positive".into());
        }
        Ok(())
    }

    pub fn labels(&self) -> Array2<RegionKind> {
        let mut labels = Array2::from_elem((self.ny, self.nx), RegionKind::Tissue);
        for s in &self.layout {
            for y in s.y0..s.y1.min(self.ny) {
                for x in s.x0..s.x1.min(self.nx) {
                    labels[[y, x]] = s.kind;
                }
            }
        }
        labels
    }

    pub fn reflectivity_map(&self) -> Array2<f64> {
        self.labels().mapv(|k| self.regions.get(k).reflectivity)
    }

    pub fn region_mask(&self, kind: RegionKind) -> RoiMask {
        RoiMask::new(self.labels().mapv(|k| k == kind))
    }

    /// Noise variance per complex sample (0 when disabled).
    pub fn noise_variance(&self) -> f64 {
        if self.noise_snr_db.is_infinite() && self.noise_snr_db > 0.0 {
            0.0
        } else {
            10f64.powf(-self.noise_snr_db / 10.0)
        }
    }

    /// Decorrelation time of a region at cardiac value `p`.
    pub fn tau_at(&self, kind: RegionKind, p: f64) -> f64 {
        let r = self.regions.get(kind);
        r.tau_c_s / (1.0 + r.pulsatility * p * (self.tau_ratio - 1.0))
    }

    /// The same scene with every region at tissue reflectivity.
    pub fn with_uniform_reflectivity(&self) -> SceneSpec {
        let mut s = self.clone();
        let r = s.regions.tissue.reflectivity;
        s.layout.retain(|l| l.kind != RegionKind::Absorber);
        for kind in RegionKind::ALL {
            s.regions.get_mut(kind).reflectivity = r;
        }
        s
    }
}
