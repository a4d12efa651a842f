//! Reproducible experiment pipelines: config resolution, the pipelines
//! themselves, and CSV/JSON emission with a manifest of the resolved config.

pub mod config;
pub mod output;
mod pipelines;

use std::path::{Path, PathBuf};

pub use config::{parse_config, parse_override, Entry, Experiment, ExperimentConfig};
pub use output::{Cell, Report, Table};
pub use pipelines::{run, zero_crossings, MIN_PLANNER_GAIN};

use crate::error::Result;

/// Runs `cfg` and writes the manifest and all outputs into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<(Report, Vec<PathBuf>)> {
    let report = run(cfg)?;
    let written = report.write(dir, &cfg.render(), &cfg.hash())?;
    Ok((report, written))
}
