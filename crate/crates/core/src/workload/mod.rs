//! Datasets, update traces, trace replay and result aggregation.

mod data;
mod metrics;
mod replay;
mod trace;

use std::path::PathBuf;

use thiserror::Error;

use crate::engine::EngineError;
use crate::metric::{MetricError, PointId};
use crate::oracles::OracleError;

pub use data::{gen_random, load_points_csv, read_points_csv, write_points_csv, RNG_ALGORITHM};
pub use metrics::{
    aggregate, format_table, geometric_mean, CellAggregate, RunConfig, RunMetrics, TableMetric,
    TimingSummary,
};
pub use replay::{replay, replay_validated, ReplayOptions, ValidateOptions, ValidationFailure};
pub use trace::{
    random_mix_trace, sliding_window_trace, Event, Trace, TraceStats, QUERY_PROBABILITY,
};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("event {index}: {message}")]
    Trace { index: usize, message: String },
    #[error("no values to average")]
    EmptyMean,
    #[error("geometric mean needs positive values, got {0}")]
    NonPositive(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl WorkloadError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WorkloadError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn trace(index: usize, message: impl Into<String>) -> Self {
        WorkloadError::Trace {
            index,
            message: message.into(),
        }
    }
}

pub(crate) fn unknown_id(index: usize, id: PointId) -> WorkloadError {
    WorkloadError::trace(index, format!("point {id} is not live"))
}
