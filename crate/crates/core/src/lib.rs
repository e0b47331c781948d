//! Continuous performance benchmarking building blocks.
//!
//! - [`harness`]: registers and runs micro-benchmarks with adaptive iteration
//!   counts, thread ranges, repetition statistics and re-runs of unstable
//!   measurements.
//! - [`model`]: tagged, timestamped measurement points, the line-oriented wire
//!   format and the structured results file.
//! - [`store`]: an embedded append-only time-series store with a filtered,
//!   bucketed, grouped query engine.
//! - [`detector`]: baseline-vs-threshold regression detection with
//!   false-positive annotations, and run-to-run comparison.

pub mod detector;
pub mod harness;
pub mod model;
pub mod store;

#[cfg(feature = "fixtures")]
pub mod fixtures;

pub use detector::{Annotation, AnnotationKind, DetectionPolicy, Direction, RegressionEvent};
pub use harness::{
    sink, BenchmarkResult, BenchmarkSpec, ClockMode, Registry, RunStats, RunnerConfig, State,
    TimeUnit,
};
pub use model::{MeasurementPoint, RunContext, SeriesKey};
pub use store::{Aggregate, QuerySpec, Series, Store};
