use std::path::Path;

use ldh_core::doppler::{reverse_contrast, roi_trace};
use ldh_core::pipeline::band_movie;
use ldh_core::simulator::{gen_field_stack, integrate_decimate};
use ldh_core::stats::{mean, pearson, pop_std};
use ldh_core::{Band, Error, StftPlan, SvdFilterSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{self, CompareConfig};
use crate::error::CliResult;
use crate::manifest::{trace_csv, Manifest, OutDir, RunInfo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub roi: String,
    pub fast_rate_hz: f64,
    pub low_rate_hz: f64,
    pub factor: usize,
    pub high_band: Band,
    pub rc_band: Band,
    pub n_windows: usize,
    pub pearson: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Zero mean, unit population standard deviation.
pub fn zscore(x: &[f64]) -> CliResult<Vec<f64>> {
    let (m, s) = (mean(x), pop_std(x));
    if !(s > 0.0) {
        return Err(Error::ZeroArteryStd.into());
    }
    Ok(x.iter().map(|v| (v - m) / s).collect())
}

pub fn run(config_path: &Path, out: &Path, info: &RunInfo) -> CliResult<(Manifest, CompareReport)> {
    let mut cfg: CompareConfig = config::load(config_path)?;
    if let Some(seed) = info.seed_override {
        cfg.scene.seed = seed;
    }
    cfg.validate()?;
    let echo = config::echo(&cfg)?;
    let c = &cfg.compare;

    let fast_fs = c.fast_rate_hz;
    let low_fs = fast_fs / c.factor as f64;
    let high_band = Band::to_nyquist(c.high_low_hz, fast_fs)?;
    let rc_band = Band::new(c.rc_low_hz, c.rc_high_hz.unwrap_or(low_fs / 2.0))?;
    rc_band.validate_for(low_fs)?;
    let fast_plan = StftPlan::new(c.n_win, c.hop);
    let low_plan = StftPlan::new(c.n_win / c.factor, c.hop / c.factor);
    let svd = SvdFilterSpec {
        cutoff_hz: c.svd_cutoff_hz,
        rank_override: None,
    };

    let (stack, truth) = gen_field_stack(&cfg.scene, fast_fs, c.nt)?;
    let mask = truth.region_mask(c.roi);
    let high = band_movie(&stack, &fast_plan, Some(svd), high_band)?;
    let low_stack = integrate_decimate(&stack, c.factor)?;
    drop(stack);
    let low = reverse_contrast(&band_movie(&low_stack, &low_plan, Some(svd), rc_band)?)?;

    let high_trace = zscore(&roi_trace(&high, &mask)?)?;
    let rc_trace = zscore(&roi_trace(&low, &mask)?)?;
    let r = pearson(&high_trace, &rc_trace);
    let report = CompareReport {
        roi: c.roi.name().to_string(),
        fast_rate_hz: fast_fs,
        low_rate_hz: low_fs,
        factor: c.factor,
        high_band,
        rc_band,
        n_windows: high_trace.len(),
        pearson: r,
        threshold: c.threshold,
        pass: r > c.threshold,
    };

    let mut dir = OutDir::create(out)?;
    let base = json!({ "roi": report.roi, "normalization": "zscore", "seed": cfg.scene.seed, "nt": c.nt });
    let mut hp = base.clone();
    hp["sample_rate_hz"] = json!(fast_fs);
    hp["band"] = json!(high_band);
    hp["plan"] = json!(fast_plan);
    hp["svd"] = json!(svd);
    dir.write_bytes("traces/high_band.csv", "trace", hp, trace_csv(high.times(), &high_trace).as_bytes())?;
    let mut lp = base;
    lp["sample_rate_hz"] = json!(low_fs);
    lp["band"] = json!(rc_band);
    lp["polarity"] = json!("reverse");
    lp["factor"] = json!(c.factor);
    lp["plan"] = json!(low_plan);
    lp["svd"] = json!(svd);
    dir.write_bytes("traces/rc_low_band.csv", "trace", lp, trace_csv(low.times(), &rc_trace).as_bytes())?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| crate::error::CliError::Core(e.into()))?;
    dir.write_bytes("report.json", "report", json!(c), (text + "\n").as_bytes())?;
    Ok((dir.finish(info, echo)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscore_moments() {
        let z = zscore(&[1.0, 2.0, 3.0, 6.0]).unwrap();
        assert!(mean(&z).abs() < 1e-12);
        assert!((pop_std(&z) - 1.0).abs() < 1e-12);
        assert!(zscore(&[2.0, 2.0]).is_err());
    }
}
