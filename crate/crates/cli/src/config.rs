//! TOML run configurations for each subcommand.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ldh_core::composite::RenderSpec;
use ldh_core::simulator::{RegionKind, SceneSpec};
use ldh_core::{Band, CarrierSpec, StftPlan, SvdFilterSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Parses `path`; syntax and unknown-key errors carry the line and key.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(path, e.to_string()))?;
    toml::from_str(&text).map_err(|e| CliError::config(path, e.to_string().trim_end().to_string()))
}

/// Echo of the effective configuration, defaults filled in.
pub fn echo<T: Serialize>(cfg: &T) -> CliResult<String> {
    toml::to_string(cfg).map_err(|e| CliError::Invalid(format!("cannot echo config: {e}")))
}

pub fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn check_name(what: &str, name: &str) -> CliResult<()> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "{what} name {name:?} must be non-empty and use only [A-Za-z0-9_-]"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferogramConfig {
    pub kx: f64,
    pub ky: f64,
    pub halfwidth: f64,
    #[serde(default = "default_ref_amplitude")]
    pub ref_amplitude: f64,
}

fn default_ref_amplitude() -> f64 {
    4.0
}

impl InterferogramConfig {
    pub fn carrier(&self) -> CliResult<CarrierSpec> {
        Ok(CarrierSpec::new(self.kx, self.ky, self.halfwidth)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub sample_rate_hz: f64,
    pub nt: usize,
    pub interferogram: Option<InterferogramConfig>,
    pub scene: SceneSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            sample_rate_hz: 64_000.0,
            nt: 4096,
            interferogram: None,
            scene: SceneSpec::default(),
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(CliError::Invalid(format!(
                "sample_rate_hz must be > 0, got {}",
                self.sample_rate_hz
            )));
        }
        if self.nt == 0 {
            return Err(CliError::Invalid("nt must be >= 1".into()));
        }
        self.scene.validate()?;
        if let Some(i) = &self.interferogram {
            i.carrier()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvdConfig {
    pub enabled: bool,
    pub cutoff_hz: f64,
    pub rank_override: Option<usize>,
}

impl Default for SvdConfig {
    fn default() -> Self {
        let d = SvdFilterSpec::default();
        SvdConfig {
            enabled: true,
            cutoff_hz: d.cutoff_hz,
            rank_override: d.rank_override,
        }
    }
}

impl SvdConfig {
    pub fn spec(&self) -> Option<SvdFilterSpec> {
        self.enabled.then_some(SvdFilterSpec {
            cutoff_hz: self.cutoff_hz,
            rank_override: self.rank_override,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    pub kx: f64,
    pub ky: f64,
    pub halfwidth: f64,
    #[serde(default)]
    pub z_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    FullRate,
    LowRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub name: String,
    pub low_hz: f64,
    /// Absent means Nyquist.
    #[serde(default)]
    pub high_hz: Option<f64>,
    #[serde(default)]
    pub rc: bool,
}

impl BandConfig {
    fn new(name: &str, low_hz: f64, high_hz: Option<f64>, rc: bool) -> Self {
        BandConfig {
            name: name.to_string(),
            low_hz,
            high_hz,
            rc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeConfig {
    pub slow: String,
    pub fast: String,
}

impl Preset {
    pub fn bands(self) -> Vec<BandConfig> {
        match self {
            Preset::FullRate => vec![
                BandConfig::new("low_1k", 200.0, Some(1000.0), true),
                BandConfig::new("low_4k", 200.0, Some(4000.0), true),
                BandConfig::new("mid", 1000.0, Some(6000.0), false),
                BandConfig::new("high", 6000.0, None, false),
                BandConfig::new("full", 0.0, None, false),
            ],
            Preset::LowRate => vec![
                BandConfig::new("low_1k", 200.0, Some(1000.0), true),
                BandConfig::new("low_4k", 200.0, None, true),
                BandConfig::new("mid", 1000.0, None, false),
                BandConfig::new("full", 0.0, None, false),
            ],
        }
    }

    pub fn composite(self) -> CompositeConfig {
        let fast = match self {
            Preset::FullRate => "high",
            Preset::LowRate => "low_1k",
        };
        CompositeConfig {
            slow: "mid".into(),
            fast: fast.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiConfig {
    pub name: String,
    /// `[x0, y0, x1, y1]`, half-open.
    #[serde(default)]
    pub rect: Option<[usize; 4]>,
    /// Region class from the input's `.labels.u8` ground truth.
    #[serde(default)]
    pub region: Option<RegionKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessConfig {
    /// Stack path, relative to the config file.
    pub input: PathBuf,
    pub stft: StftPlan,
    pub svd: SvdConfig,
    pub reconstruct: Option<ReconstructConfig>,
    pub preset: Option<Preset>,
    pub band: Vec<BandConfig>,
    pub flat_field: bool,
    pub flat_field_sigma_px: Option<f64>,
    pub baseline: bool,
    pub residual_spectrograms: bool,
    pub render: RenderSpec,
    pub roi: Vec<RoiConfig>,
    pub composite: Option<CompositeConfig>,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        ProcessConfig {
            input: PathBuf::new(),
            stft: StftPlan::default(),
            svd: SvdConfig::default(),
            reconstruct: None,
            preset: None,
            band: Vec::new(),
            flat_field: false,
            flat_field_sigma_px: None,
            baseline: false,
            residual_spectrograms: false,
            render: RenderSpec::default(),
            roi: Vec::new(),
            composite: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedBand {
    pub name: String,
    pub band: Band,
    pub rc: bool,
}

impl ProcessConfig {
    /// Expands the preset into explicit bands and composite.
    pub fn expanded(mut self) -> Self {
        if let Some(p) = self.preset.take() {
            let mut bands = p.bands();
            bands.append(&mut self.band);
            self.band = bands;
            if self.composite.is_none() {
                self.composite = Some(p.composite());
            }
        }
        self
    }

    pub fn bands(&self, sample_rate_hz: f64) -> CliResult<Vec<NamedBand>> {
        if self.band.is_empty() {
            return Err(CliError::Invalid("no bands configured; add [[band]] or a preset".into()));
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(self.band.len());
        for b in &self.band {
            check_name("band", &b.name)?;
            if !seen.insert(b.name.as_str()) {
                return Err(CliError::Invalid(format!("duplicate band name {:?}", b.name)));
            }
            let band = Band::new(b.low_hz, b.high_hz.unwrap_or(sample_rate_hz / 2.0))?;
            band.validate_for(sample_rate_hz)?;
            out.push(NamedBand {
                name: b.name.clone(),
                band,
                rc: b.rc,
            });
        }
        if let Some(c) = &self.composite {
            for n in [&c.slow, &c.fast] {
                if !seen.contains(n.as_str()) {
                    return Err(CliError::Invalid(format!("composite refers to unknown band {n:?}")));
                }
            }
        }
        Ok(out)
    }

    pub fn check_rois(&self) -> CliResult<()> {
        let mut seen = BTreeSet::new();
        for r in &self.roi {
            check_name("roi", &r.name)?;
            if !seen.insert(r.name.as_str()) {
                return Err(CliError::Invalid(format!("duplicate roi name {:?}", r.name)));
            }
            if r.rect.is_some() == r.region.is_some() {
                return Err(CliError::Invalid(format!(
                    "roi {:?} needs exactly one of rect or region",
                    r.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareParams {
    pub fast_rate_hz: f64,
    pub factor: usize,
    pub nt: usize,
    /// Full-rate window; the low-rate window is `n_win / factor`.
    pub n_win: usize,
    pub hop: usize,
    pub svd_cutoff_hz: f64,
    /// Reverse-contrast band at the low rate; absent high edge means Nyquist.
    pub rc_low_hz: f64,
    pub rc_high_hz: Option<f64>,
    /// High band at the full rate, up to Nyquist.
    pub high_low_hz: f64,
    pub roi: RegionKind,
    pub threshold: f64,
}

impl Default for CompareParams {
    fn default() -> Self {
        CompareParams {
            fast_rate_hz: 64_000.0,
            factor: 8,
            nt: 4096,
            n_win: 256,
            hop: 64,
            svd_cutoff_hz: 100.0,
            rc_low_hz: 200.0,
            rc_high_hz: Some(4000.0),
            high_low_hz: 6000.0,
            roi: RegionKind::Artery,
            threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub scene: SceneSpec,
    pub compare: CompareParams,
}

impl CompareConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.scene.validate()?;
        let c = &self.compare;
        if c.factor == 0 {
            return Err(CliError::Invalid("factor must be >= 1".into()));
        }
        if !c.nt.is_multiple_of(c.factor) {
            return Err(CliError::Invalid(format!(
                "factor {} does not divide nt {}",
                c.factor, c.nt
            )));
        }
        if !c.n_win.is_multiple_of(c.factor) || !c.hop.is_multiple_of(c.factor) {
            return Err(CliError::Invalid(format!(
                "factor {} must divide n_win {} and hop {}",
                c.factor, c.n_win, c.hop
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// A `process` manifest, relative to the config file.
    pub manifest: PathBuf,
    pub render: RenderSpec,
    pub composite: Vec<NamedComposite>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            manifest: PathBuf::new(),
            render: RenderSpec::default(),
            composite: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedComposite {
    pub name: String,
    pub slow: String,
    pub fast: String,
}

impl RenderConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.manifest.as_os_str().is_empty() {
            return Err(CliError::Invalid("manifest is required".into()));
        }
        self.render.validate()?;
        let mut seen = BTreeSet::new();
        for c in &self.composite {
            check_name("composite", &c.name)?;
            if !seen.insert(c.name.as_str()) {
                return Err(CliError::Invalid(format!("duplicate composite name {:?}", c.name)));
            }
        }
        Ok(())
    }
}
