//! Desk-scale experiment runner: learning-rate sweeps, loss trajectories,
//! summary statistics and the files they are persisted to.
//!
//! A sweep is the Cartesian product of the primary grid, the secondary grid
//! (EVE only) and the seed list. Each cell trains independently, so cells can
//! run in parallel; records are always returned in canonical cell order.

mod config;
mod export;
mod run;
mod stats;
mod svg;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{log_grid, ExperimentConfig, ObjectiveSpec, OptimizerKind, RunCell, SummaryField};
pub use export::{
    export, read_run_csv, report, run_csv_name, write_run_csv, ParsedRun, RunSummary, SweepStats,
    SweepSummary, CURVES_FILE, HISTOGRAM_FILE, STATS_FILE, SUMMARY_FILE,
};
pub use run::{run_experiment, sweep, RunRecord, ValPoint};
pub use stats::{format_table_row, summarize, summarize_records, SummaryStats};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config field `{field}`: {msg}")]
    InvalidConfig { field: String, msg: String },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Optim(#[from] crate::optim::OptimError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: malformed run CSV: {msg}")]
    Malformed { path: PathBuf, msg: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no finite values to summarize")]
    EmptyInput,
}

impl HarnessError {
    pub(crate) fn invalid(field: &str, msg: impl Into<String>) -> Self {
        HarnessError::InvalidConfig {
            field: field.to_string(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
