//! Configuration-driven experiment runner for `skewprod`.

pub mod config;
pub mod presets;
pub mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::run::{execute, persist, unix_now, ResultRecord, RunInfo};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {msg}")]
    Config { path: String, msg: String },
    #[error("experiment `{experiment}`: {source}")]
    Numerical { experiment: String, source: skewprod::Error },
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical { .. } | CliError::Io { .. } | CliError::Pool(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Warnings count as acceptance failures.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub record: ResultRecord,
    pub out: PathBuf,
    pub exit_code: i32,
}

/// Applies the overrides, runs on a pool of the requested size and writes
/// the artifacts.
pub fn run_config(mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let out = opts.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let workers = opts.workers.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CliError::Pool(e.to_string()))?;
    let started = unix_now();
    let clock = Instant::now();
    let (record, timings) = pool.install(|| execute(&cfg))?;
    let info = RunInfo { started_unix: started, wall_seconds: clock.elapsed().as_secs_f64(), workers, per_experiment_seconds: timings };
    persist(&out, &record, &info)?;
    let warned = record.warnings().next().is_some();
    let exit_code = if !record.passed || (opts.strict && warned) { 1 } else { 0 };
    Ok(RunSummary { record, out, exit_code })
}

pub fn run_path(path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    run_config(config::load_config(path)?, opts)
}
