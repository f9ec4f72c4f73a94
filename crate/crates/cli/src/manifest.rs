//! Output directory bookkeeping and the run manifest.

use std::path::{Path, PathBuf};

use ldh_core::composite::{write_image_sequence, Image};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the manifest's directory, `/`-separated.
    pub path: String,
    pub kind: String,
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: PathBuf,
    pub seed_override: Option<u64>,
    pub threads: Option<usize>,
    /// Effective configuration as TOML, defaults filled in.
    pub config: String,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn read(path: &Path) -> CliResult<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Core(e.into()))
    }
}

/// Run header fields shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunInfo {
    pub command: &'static str,
    pub config_path: PathBuf,
    pub seed_override: Option<u64>,
    pub threads: Option<usize>,
}

/// Writes files under one root and records each as an artifact.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path of `rel`, creating its parent directory.
    pub fn prepare(&self, rel: &str) -> CliResult<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        Ok(p)
    }

    pub fn record(&mut self, path: &Path, kind: &str, params: Value) -> CliResult<()> {
        let rel = path
            .strip_prefix(&self.root)
            .map_err(|_| CliError::Invalid(format!("{} is outside the output directory", path.display())))?;
        let rel = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        self.artifacts.push(Artifact {
            path: rel,
            kind: kind.to_string(),
            params,
        });
        Ok(())
    }

    pub fn write_bytes(&mut self, rel: &str, kind: &str, params: Value, bytes: &[u8]) -> CliResult<PathBuf> {
        let p = self.prepare(rel)?;
        std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.record(&p, kind, params)?;
        Ok(p)
    }

    pub fn write_image(&mut self, rel: &str, kind: &str, params: Value, img: &Image) -> CliResult<PathBuf> {
        let p = self.prepare(rel)?;
        img.write(&p)?;
        self.record(&p, kind, params)?;
        Ok(p)
    }

    /// `<dir>/<prefix>_NNN.pgm` plus its index file.
    pub fn write_sequence(&mut self, dir: &str, prefix: &str, kind: &str, params: Value, frames: &[Image], times_s: &[f64]) -> CliResult<()> {
        let d = self.prepare(&format!("{dir}/x"))?;
        let d = d.parent().unwrap_or(&self.root).to_path_buf();
        for p in write_image_sequence(frames, times_s, &d, prefix)? {
            let k = if p.extension().is_some_and(|e| e == "txt") { "frame_index" } else { kind };
            self.record(&p, k, params.clone())?;
        }
        Ok(())
    }

    /// Records paths written by other code, `kind` per path.
    pub fn record_all(&mut self, paths: &[(PathBuf, &str)], params: &Value) -> CliResult<()> {
        for (p, k) in paths {
            self.record(p, k, params.clone())?;
        }
        Ok(())
    }

    pub fn finish(self, info: &RunInfo, config: String) -> CliResult<Manifest> {
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: info.command.to_string(),
            config_path: info.config_path.clone(),
            seed_override: info.seed_override,
            threads: info.threads,
            config,
            artifacts: self.artifacts,
        };
        let p = self.root.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Core(e.into()))?;
        std::fs::write(&p, text + "\n").map_err(|e| CliError::io(&p, e))?;
        Ok(m)
    }
}

/// `time_s,value` lines.
pub fn trace_csv(t_s: &[f64], v: &[f64]) -> String {
    let mut s = String::from("time_s,value\n");
    for (t, x) in t_s.iter().zip(v) {
        s.push_str(&format!("{t:.9},{x:.12e}\n"));
    }
    s
}
