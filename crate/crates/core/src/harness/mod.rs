//! Micro-benchmark harness.
//!
//! A [`BenchmarkSpec`] names a benchmark and carries one or more variants
//! (the same body instantiated for different types or strategies), optional
//! geometric parameter ranges, an optional thread range, the clock used for
//! calibration decisions and the reporting time unit. Specs are collected in
//! a [`Registry`], which expands them into concrete instances; each instance
//! is measured by [`run_one`].
//!
//! ```no_run
//! use contbench::harness::{sink, BenchmarkSpec, Registry, TimeUnit};
//!
//! let mut registry = Registry::new();
//! registry
//!     .register(
//!         BenchmarkSpec::new("BM_Sum")
//!             .variant("u32", |state| {
//!                 let n = state.range(0) as u32;
//!                 for _ in state.iter() {
//!                     sink((0..n).sum::<u32>());
//!                 }
//!             })
//!             .range(1, 32, 8)
//!             .unit(TimeUnit::Microsecond),
//!     )
//!     .unwrap();
//! ```

mod calibrate;
mod clock;
mod memory;
mod range;
mod report;
mod runner;
mod spec;
mod state;
pub(crate) mod stats;
pub mod suite;

use thiserror::Error;

pub use calibrate::{calibrate_iterations, Calibration, MAX_ITERATIONS};
pub use clock::{thread_cpu_time, ProcessClock};
pub use memory::measure_memory_peak;
pub use range::{expand_range, expand_thread_range, hardware_threads};
pub use report::render_console;
pub use runner::{run_all, run_instance, run_one, BenchmarkResult, RunnerConfig};
pub use spec::{
    BenchmarkSpec, Body, ClockMode, Fixture, Hook, Instance, ParamRange, Registry, ThreadRange,
    TimeUnit, Variant,
};
pub use state::{Iterations, State};
pub use stats::{aggregate_stats, check_stability, RunStats, Stability};

/// Marks `value` as observed so the optimizer cannot elide the computation
/// that produced it.
#[inline(always)]
pub fn sink<T>(value: T) -> T {
    std::hint::black_box(value)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("benchmark name must not be empty")]
    EmptyName,
    #[error("benchmark `{0}` is already registered")]
    DuplicateName(String),
    #[error("benchmark `{0}` has no variants")]
    NoVariants(String),
    #[error("benchmark `{name}` has duplicate variant label `{label}`")]
    DuplicateVariant { name: String, label: String },
    #[error("invalid range: low {low} must satisfy 1 <= low <= high ({high})")]
    InvalidRange { low: i64, high: i64 },
    #[error("invalid range multiplier {0}: must be at least 2")]
    InvalidMultiplier(i64),
    #[error("min_time must be a positive number of seconds, got {0}")]
    InvalidMinTime(f64),
    #[error("cannot aggregate an empty sample list")]
    EmptySamples,
}
