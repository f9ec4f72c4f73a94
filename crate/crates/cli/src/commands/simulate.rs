use std::path::Path;

use ldh_core::simulator::{gen_field_stack, render_interferograms};
use ldh_core::stack::sidecar_path;
use ldh_core::{write_stack, Stack};
use serde_json::json;

use crate::config::{self, SimulateConfig};
use crate::error::CliResult;
use crate::manifest::{Manifest, OutDir, RunInfo};

pub const FIELD_STACK: &str = "field.rcl";
pub const INTERFEROGRAM_STACK: &str = "interferograms.rcl";

pub fn run(config_path: &Path, out: &Path, info: &RunInfo) -> CliResult<Manifest> {
    let mut cfg: SimulateConfig = config::load(config_path)?;
    if let Some(seed) = info.seed_override {
        cfg.scene.seed = seed;
    }
    cfg.validate()?;
    let echo = config::echo(&cfg)?;

    let mut dir = OutDir::create(out)?;
    let (field, truth) = gen_field_stack(&cfg.scene, cfg.sample_rate_hz, cfg.nt)?;
    let params = json!({
        "sample_rate_hz": cfg.sample_rate_hz,
        "nt": cfg.nt,
        "seed": cfg.scene.seed,
        "nx": cfg.scene.nx,
        "ny": cfg.scene.ny,
    });

    let field_path = dir.prepare(FIELD_STACK)?;
    let interferograms = match &cfg.interferogram {
        Some(i) => Some((render_interferograms(&field, &i.carrier()?, i.ref_amplitude)?, *i)),
        None => None,
    };
    write_stack(&Stack::Complex(field), &field_path)?;
    dir.record_all(
        &[(field_path.clone(), "hologram_stack"), (sidecar_path(&field_path), "stack_sidecar")],
        &params,
    )?;

    if let Some((frames, i)) = interferograms {
        let p = dir.prepare(INTERFEROGRAM_STACK)?;
        write_stack(&Stack::Real(frames), &p)?;
        let mut ip = params.clone();
        ip["carrier"] = json!(i);
        dir.record_all(&[(p.clone(), "interferogram_stack"), (sidecar_path(&p), "stack_sidecar")], &ip)?;
    }

    let written = truth.write(&field_path.with_extension(""))?;
    let kinds = ["ground_truth", "region_labels", "reflectivity_map"];
    let tagged: Vec<_> = written.into_iter().zip(kinds).collect();
    dir.record_all(&tagged, &params)?;

    dir.finish(info, echo)
}
