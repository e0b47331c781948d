use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ModelError, RunContext};
use crate::harness::BenchmarkResult;

pub const SCHEMA_VERSION: &str = "1";

/// A persisted harness run: context plus every result, stats included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: String,
    pub context: RunContext,
    pub results: Vec<BenchmarkResult>,
}

/// `--list` output of a suite executable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteListing {
    pub schema_version: String,
    pub instances: Vec<String>,
}

/// `--run-json` output of a suite executable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRun {
    pub schema_version: String,
    pub compiler: String,
    pub build_type: String,
    pub results: Vec<BenchmarkResult>,
}

impl SuiteListing {
    pub fn new(instances: Vec<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_owned(),
            instances,
        }
    }

    pub fn encode(&self) -> String {
        to_document(self)
    }

    pub fn decode(text: &str) -> Result<Self, ModelError> {
        from_document(text)
    }
}

impl SuiteRun {
    /// Tags the results with the toolchain and profile of the current build.
    pub fn for_this_build(results: Vec<BenchmarkResult>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_owned(),
            compiler: format!("rustc-{}", env!("CONTBENCH_RUSTC_VERSION")),
            build_type: if cfg!(debug_assertions) {
                "debug".to_owned()
            } else {
                "release".to_owned()
            },
            results,
        }
    }

    pub fn encode(&self) -> String {
        to_document(self)
    }

    pub fn decode(text: &str) -> Result<Self, ModelError> {
        from_document(text)
    }
}

fn to_document<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Checks `schema_version` before decoding the rest, so a future format
/// fails with a precise message.
fn from_document<T: DeserializeOwned>(text: &str) -> Result<T, ModelError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ModelError::Document(e.to_string()))?;
    match value.get("schema_version") {
        Some(serde_json::Value::String(v)) if v == SCHEMA_VERSION => {}
        Some(serde_json::Value::String(v)) => return Err(ModelError::UnsupportedSchema(v.clone())),
        Some(other) => return Err(ModelError::UnsupportedSchema(other.to_string())),
        None => return Err(ModelError::Document("missing schema_version".to_owned())),
    }
    serde_json::from_value(value).map_err(|e| ModelError::Document(e.to_string()))
}

pub fn encode_results_file(results: &[BenchmarkResult], ctx: &RunContext) -> String {
    to_document(&ResultsFile {
        schema_version: SCHEMA_VERSION.to_owned(),
        context: ctx.clone(),
        results: results.to_vec(),
    })
}

pub fn decode_results_file(text: &str) -> Result<(Vec<BenchmarkResult>, RunContext), ModelError> {
    let file: ResultsFile = from_document(text)?;
    Ok((file.results, file.context))
}
