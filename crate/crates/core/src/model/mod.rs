//! Measurement records and their serializations.
//!
//! A [`MeasurementPoint`] is a measurement name, a sorted tag set (identity),
//! numeric fields (values) and a nanosecond timestamp. Points travel as
//! single text lines (see [`encode_line`]); whole harness runs are persisted
//! as JSON results files (see [`ResultsFile`]).

mod context;
mod line;
mod point;
mod results;

use thiserror::Error;

pub use context::RunContext;
pub use line::{decode_line, encode_line, encode_lines, LineError};
pub use point::{results_to_points, MeasurementPoint, SeriesKey, BENCHMARK_MEASUREMENT};
pub use results::{
    decode_results_file, encode_results_file, ResultsFile, SuiteListing, SuiteRun, SCHEMA_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("measurement name must not be empty")]
    EmptyMeasurement,
    #[error("{what} `{value}` must be non-empty and contain no newline")]
    InvalidName { what: &'static str, value: String },
    #[error("point has no fields")]
    NoFields,
    #[error("field `{0}` is not a finite number")]
    NonFiniteField(String),
    #[error("context tag `{0}` must not be empty")]
    EmptyContextTag(&'static str),
    #[error("timestamp must be positive, got {0}")]
    InvalidTimestamp(i64),
    #[error("unsupported schema version `{0}`")]
    UnsupportedSchema(String),
    #[error("malformed document: {0}")]
    Document(String),
}
