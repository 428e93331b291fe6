//! Batch front end for the `mcflow` solvers: configuration parsing, run
//! execution, artifact writing, comparison tables and curve plots.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod runner;

use std::path::{Path, PathBuf};

pub use config::RunConfig;
pub use error::CliError;
pub use runner::{execute, RunOutcome};

/// Environment variable naming the root for relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "MCFLOW_OUTPUT_ROOT";

/// Where a run writes: `override_dir` when given, otherwise the configured
/// directory, placed under `root` when it is relative.
pub fn resolve_output_dir(cfg: &RunConfig, override_dir: Option<&Path>, root: Option<&Path>) -> PathBuf {
    match (override_dir, root) {
        (Some(dir), _) => dir.to_path_buf(),
        (None, Some(root)) if cfg.run.output_dir.is_relative() => root.join(&cfg.run.output_dir),
        _ => cfg.run.output_dir.clone(),
    }
}

/// Executes `cfg` and writes its artifacts (or `failure.json`) into `dir`.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome, CliError> {
    match execute(cfg) {
        Ok(outcome) => {
            output::write_artifacts(&outcome, dir)?;
            Ok(outcome)
        }
        Err(err @ CliError::Config(_)) => Err(err),
        Err(err) => {
            output::write_failure(dir, &err)?;
            Err(err)
        }
    }
}
