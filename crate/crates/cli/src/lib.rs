//! `ldh` command-line pipeline: simulate scenes, process stacks into power
//! Doppler artifacts, compare frame rates and re-render outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::manifest::RunInfo;

#[derive(Debug, Parser)]
#[command(name = "ldh", version, about = "Laser Doppler holography pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic hologram stack with ground truth.
    Simulate(RunArgs),
    /// Run the processing chain on a stack.
    Process(RunArgs),
    /// Full-rate high band vs decimated reverse-contrast low band.
    CompareRates(RunArgs),
    /// Re-render mean images and composites from a process manifest.
    Render(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; every file is written below it.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the scene seed (simulate, compare-rates).
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a) | Command::Process(a) | Command::CompareRates(a) | Command::Render(a) => a,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Process(_) => "process",
            Command::CompareRates(_) => "compare-rates",
            Command::Render(_) => "render",
        }
    }
}

/// Runs one subcommand and returns a one-line summary.
pub fn run(command: &Command) -> CliResult<String> {
    let a = command.args();
    if let Some(n) = a.threads {
        if n == 0 {
            return Err(CliError::Invalid("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    }
    let info = RunInfo {
        command: command.name(),
        config_path: a.config.clone(),
        seed_override: a.seed,
        threads: a.threads,
    };
    let summary = match command {
        Command::Simulate(_) => {
            let m = commands::simulate::run(&a.config, &a.out, &info)?;
            format!("wrote {} files to {}", m.artifacts.len(), a.out.display())
        }
        Command::Process(_) => {
            let m = commands::process::run(&a.config, &a.out, &info)?;
            format!("wrote {} files to {}", m.artifacts.len(), a.out.display())
        }
        Command::CompareRates(_) => {
            let (_, r) = commands::compare::run(&a.config, &a.out, &info)?;
            format!(
                "{} r = {:.4} (threshold {}) {}",
                r.roi,
                r.pearson,
                r.threshold,
                if r.pass { "PASS" } else { "FAIL" }
            )
        }
        Command::Render(_) => {
            let m = commands::render::run(&a.config, &a.out, &info)?;
            format!("wrote {} files to {}", m.artifacts.len(), a.out.display())
        }
    };
    Ok(summary)
}
