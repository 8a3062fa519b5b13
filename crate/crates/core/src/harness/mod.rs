//! Configuration, persistence, evaluation, plotting and the CLI commands.

mod checkpoint;
mod cli;
mod config;
mod eval;
mod plot;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use cli::{
    cli_eval, cli_replay, cli_train, eval_to_dir, files, train_run, write_trajectory_artifacts, EvalOptions, TrainOptions,
    TrainSummary, DIAGNOSTIC_COLUMNS,
};
pub use config::{deep_merge, from_value, load_run_config, profile_defaults, CliOverrides, Profile, RunConfig, RunSettings};
pub use eval::{
    evaluate_starts, rollout_deterministic, EvalRow, EvaluationReport, Label, Start, StartSpec, REPORT_COLUMNS,
};
pub use plot::{time_series_svg, trajectory_svg, PlotMeta};

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::env::{EnvError, TrajectoryError};
use crate::nn::NnError;
use crate::ppo::PpoError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("run directory {0} is locked by another process (remove .lock if stale)")]
    Locked(PathBuf),
    #[error("invalid start spec: {0}")]
    Starts(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Exclusive ownership of a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let path = dir.join(".lock");
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => HarnessError::Locked(dir.to_path_buf()),
                _ => HarnessError::io(&path, e),
            })?;
        writeln!(f, "{}", std::process::id()).map_err(|e| HarnessError::io(&path, e))?;
        Ok(Self { path })
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub(crate) fn create_file(path: &Path) -> Result<File, HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    File::create(path).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_string(path: &Path, text: &str) -> Result<(), HarnessError> {
    create_file(path)?
        .write_all(text.as_bytes())
        .map_err(|e| HarnessError::io(path, e))
}
