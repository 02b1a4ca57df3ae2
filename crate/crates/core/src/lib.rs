//! Fully dynamic k-center clustering over an ensemble of navigating nets.
//!
//! Points are inserted and deleted one at a time; a `(2+ε)`-approximate
//! k-center solution can be read off at any moment for any `k`.

pub mod engine;
pub mod heap;
pub mod metric;
pub mod navnet;
pub mod oracles;
pub mod workload;

pub use engine::{Engine, EngineError, EnsembleConfig, Solution};
pub use metric::{distance, Euclidean, Metric, MetricError, PointId, PointRecord};
pub use navnet::{
    Mode, NavigatingNet, NetConfig, NetError, ScaleIndex, ValidationReport, Violation,
};
