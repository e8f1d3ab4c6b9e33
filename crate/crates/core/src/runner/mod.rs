//! Configuration files, parameter sweeps, figure presets and CSV output.
//!
//! A sweep runs every grid point for every listed seed. Grid points run in
//! parallel; each run draws from its own stream seeded by
//! [`derive_seed`]`(seed, point)`, which `runs.csv` and the manifest record,
//! so any single run can be repeated with `run --seed <run_seed>`.
//!
//! Files written by [`execute`]:
//!
//! | file | contents |
//! |---|---|
//! | `sweep.csv` | swept values, `<obs>_mean`, `<obs>_sd`, `n_seeds`, `n_errors` per grid point |
//! | `runs.csv` | one row per run, with its seed and status |
//! | `beta50.csv` | β at 50 % failures per curve, when requested |
//! | `rescaled.csv` | depth curves in rescaled variables, when requested |
//! | `runs/<id>/*.csv` | per-run time series, profile or snapshot, when requested |
//! | `manifest.json` | spec, seeds, file list, timing |

mod config;
mod execute;
mod output;
mod presets;
mod sweep;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::engine::ConfigError;

pub use config::{parse_config, parse_config_str, parse_values, spacing, Parsed};
pub use execute::{
    execute, execute_with, run_single, Beta50Row, ExecOptions, ExecReport, PointRow, PointStats,
    RunRecord, RunStatus, MANIFEST,
};
pub use output::{
    number, snapshot_header, write_profile, write_snapshot, write_timeseries, PROFILE_HEADER,
    TIMESERIES_HEADER,
};
pub use presets::{
    depth_betas, figure_preset, manager_betas, FIGURES, MANAGER_ITERATIONS, MANAGER_WORKLOADS,
    PROFILE_BETAS,
};
pub use sweep::{
    derive_seed, Axis, AxisValue, GridPoint, Observable, Param, PerRun, PlannedRun, SweepSpec,
    DEFAULT_OBSERVABLES,
};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{origin}: line {line}: {message}")]
    Syntax {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{key}: {message}")]
    Value { key: String, message: String },
    #[error("no preset for figure {0}; figures run from 1 to 8")]
    UnknownFigure(u32),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("run failed: {0}")]
    Failed(String),
}

impl RunnerError {
    /// Bad input as opposed to a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            RunnerError::Config(_)
                | RunnerError::Syntax { .. }
                | RunnerError::Value { .. }
                | RunnerError::UnknownFigure(_)
        )
    }

    /// `1` for validation errors, `2` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }
}
