use std::collections::BTreeMap;
use std::path::Path;

use ldh_core::composite::{compose_low_high, to_grayscale, Image};
use ldh_core::Error;
use ndarray::{Array2, Array3, Axis};
use serde_json::json;

use crate::commands::process::MovieParams;
use crate::config::{self, RenderConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{Manifest, OutDir, RunInfo};

/// Temporal mean of a raw `(window, y, x)` f64 dump.
pub fn load_mean_image(path: &Path, p: &MovieParams) -> CliResult<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let [n, ny, nx] = p.shape;
    let expected = (n * ny * nx * 8) as u64;
    if bytes.len() as u64 != expected || n == 0 {
        return Err(Error::SizeMismatch {
            expected,
            actual: bytes.len() as u64,
        }
        .into());
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let frames = Array3::from_shape_vec((n, ny, nx), values).expect("length checked");
    Ok(frames.mean_axis(Axis(0)).expect("n > 0"))
}

pub fn run(config_path: &Path, out: &Path, info: &RunInfo) -> CliResult<Manifest> {
    let cfg: RenderConfig = config::load(config_path)?;
    cfg.validate()?;
    let echo = config::echo(&cfg)?;
    let manifest_path = config::config_dir(config_path).join(&cfg.manifest);
    let source = Manifest::read(&manifest_path)?;
    let source_dir = config::config_dir(&manifest_path);

    // standard-polarity mean per band
    let mut means: BTreeMap<String, (Array2<f64>, MovieParams)> = BTreeMap::new();
    for a in source.artifacts.iter().filter(|a| a.kind == "movie") {
        let p: MovieParams = serde_json::from_value(a.params.clone()).map_err(|e| CliError::Core(e.into()))?;
        let mean = load_mean_image(&source_dir.join(&a.path), &p)?;
        means.insert(p.band.clone(), (mean, p));
    }
    if means.is_empty() {
        return Err(Error::InvalidMeta(format!("{} lists no movies", manifest_path.display())).into());
    }

    let mut dir = OutDir::create(out)?;
    let source_ref = manifest_path.display().to_string();
    for (name, (mean, p)) in &means {
        let mut params = serde_json::to_value(p).map_err(|e| CliError::Core(e.into()))?;
        params["render"] = json!(cfg.render);
        params["source_manifest"] = json!(source_ref);
        let mut views = vec![(name.clone(), mean.clone(), "standard")];
        if p.rc {
            views.push((format!("{name}_rc"), mean.mapv(|v| -v), "reverse"));
        }
        for (label, img, polarity) in views {
            let mut ip = params.clone();
            ip["polarity"] = json!(polarity);
            let gray = to_grayscale(&img, &cfg.render)?;
            dir.write_image(&format!("images/{label}_mean.pgm"), "mean_image", ip, &Image::Gray(gray))?;
        }
    }

    for c in &cfg.composite {
        let get = |n: &str| {
            means
                .get(n)
                .ok_or_else(|| CliError::Invalid(format!("composite {:?} refers to unknown band {n:?}", c.name)))
        };
        let (slow, _) = get(&c.slow)?;
        let (fast, fp) = get(&c.fast)?;
        let fast = if fp.rc { fast.mapv(|v| -v) } else { fast.clone() };
        let rgb = compose_low_high(slow, &fast, &cfg.render)?;
        dir.write_image(
            &format!("composites/{}.ppm", c.name),
            "composite",
            json!({ "slow": c.slow, "fast": c.fast, "fast_polarity": if fp.rc { "reverse" } else { "standard" }, "render": cfg.render, "source_manifest": source_ref }),
            &Image::Rgb(rgb),
        )?;
    }
    dir.finish(info, echo)
}
