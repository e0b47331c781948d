use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ModelError, RunContext};
use crate::harness::BenchmarkResult;

pub const BENCHMARK_MEASUREMENT: &str = "benchmark";

/// Value used for the `variant` tag of benchmarks without variants.
const DEFAULT_VARIANT: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPoint {
    pub measurement: String,
    pub tags: BTreeMap<String, String>,
    pub fields: BTreeMap<String, f64>,
    pub timestamp_ns: i64,
}

fn check_name(what: &'static str, value: &str) -> Result<(), ModelError> {
    if value.is_empty() || value.contains('\n') {
        return Err(ModelError::InvalidName {
            what,
            value: value.to_owned(),
        });
    }
    Ok(())
}

impl MeasurementPoint {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.measurement.is_empty() {
            return Err(ModelError::EmptyMeasurement);
        }
        check_name("measurement", &self.measurement)?;
        for (k, v) in &self.tags {
            check_name("tag key", k)?;
            check_name("tag value", v)?;
        }
        if self.fields.is_empty() {
            return Err(ModelError::NoFields);
        }
        for (k, v) in &self.fields {
            check_name("field key", k)?;
            if !v.is_finite() {
                return Err(ModelError::NonFiniteField(k.clone()));
            }
        }
        Ok(())
    }

    pub fn series_key(&self) -> SeriesKey {
        SeriesKey {
            measurement: self.measurement.clone(),
            tags: self.tags.clone(),
        }
    }
}

/// Identity of a series: measurement plus its full, sorted tag set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesKey {
    pub measurement: String,
    pub tags: BTreeMap<String, String>,
}

impl SeriesKey {
    pub fn new(measurement: impl Into<String>) -> Self {
        Self {
            measurement: measurement.into(),
            tags: BTreeMap::new(),
        }
    }

    pub fn with_tag(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.tags.insert(key.into(), value.into());
        self
    }

    /// True if every `filters` pair is present with an equal value.
    pub fn matches(&self, filters: &BTreeMap<String, String>) -> bool {
        filters.iter().all(|(k, v)| self.tags.get(k) == Some(v))
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.measurement)?;
        for (k, v) in &self.tags {
            write!(f, ",{k}={v}")?;
        }
        Ok(())
    }
}

const RESERVED_FIELDS: [&str; 4] = ["real_time", "cpu_time", "iterations", "memory_peak_bytes"];

/// One `benchmark` point per successful result, tagged with the run context
/// plus `name`, `variant` and `unit`. Errored results carry no measurements
/// and are skipped.
pub fn results_to_points(results: &[BenchmarkResult], ctx: &RunContext) -> Vec<MeasurementPoint> {
    let base_tags = ctx.tags();
    results
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| {
            let mut tags = base_tags.clone();
            tags.insert("name".into(), r.name.clone());
            let variant = if r.variant.is_empty() {
                DEFAULT_VARIANT
            } else {
                &r.variant
            };
            tags.insert("variant".into(), variant.to_owned());
            tags.insert("unit".into(), r.time_unit.as_str().to_owned());

            let mut fields = BTreeMap::new();
            fields.insert("real_time".into(), r.real_time_per_iter);
            fields.insert("cpu_time".into(), r.cpu_time_per_iter);
            fields.insert("iterations".into(), r.iterations as f64);
            if let Some(m) = r.memory_peak_bytes {
                fields.insert("memory_peak_bytes".into(), m as f64);
            }
            for (k, v) in &r.counters {
                if !RESERVED_FIELDS.contains(&k.as_str()) && v.is_finite() {
                    fields.insert(k.clone(), *v);
                }
            }
            MeasurementPoint {
                measurement: BENCHMARK_MEASUREMENT.to_owned(),
                tags,
                fields,
                timestamp_ns: ctx.timestamp_ns,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ClockMode, RunStats, TimeUnit};

    pub(crate) fn ctx() -> RunContext {
        RunContext {
            machine: "bench01".into(),
            commit: "0123abc".into(),
            branch: "master".into(),
            compiler: "gcc-8".into(),
            build_type: "release".into(),
            extra: BTreeMap::new(),
            timestamp_ns: 1_546_300_800_000_000_000,
        }
    }

    fn result(name: &str) -> BenchmarkResult {
        BenchmarkResult {
            name: name.into(),
            base_name: name.into(),
            variant: String::new(),
            params: vec![],
            threads: 1,
            iterations: 1000,
            real_time_per_iter: 12.5,
            cpu_time_per_iter: 12.0,
            time_unit: TimeUnit::Microsecond,
            clock_mode: ClockMode::CpuTime,
            label: String::new(),
            counters: BTreeMap::new(),
            memory_peak_bytes: None,
            repetitions_used: 3,
            unstable: false,
            stats: RunStats {
                samples: vec![12.0, 12.0, 12.0],
                mean: 12.0,
                median: 12.0,
                stddev: 0.0,
                cv: 0.0,
            },
            error: None,
        }
    }

    #[test]
    fn one_point_with_three_fields() {
        let points = results_to_points(&[result("BM_X")], &ctx());
        assert_eq!(points.len(), 1);
        let p = &points[0];
        assert_eq!(p.measurement, "benchmark");
        assert_eq!(p.fields.len(), 3);
        assert_eq!(p.tags["name"], "BM_X");
        assert_eq!(p.tags["variant"], "default");
        assert_eq!(p.tags["unit"], "us");
        assert_eq!(p.timestamp_ns, ctx().timestamp_ns);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn counters_become_fields() {
        let mut r = result("BM_X");
        r.counters.insert("bytes_per_second".into(), 1e9);
        r.memory_peak_bytes = Some(4096);
        let p = &results_to_points(&[r], &ctx())[0];
        assert_eq!(p.fields["bytes_per_second"], 1e9);
        assert_eq!(p.fields["memory_peak_bytes"], 4096.0);
    }

    #[test]
    fn shared_context_tags() {
        let points = results_to_points(&[result("BM_A"), result("BM_B")], &ctx());
        assert_eq!(points.len(), 2);
        for key in ["machine", "commit", "branch", "compiler", "build_type"] {
            assert_eq!(points[0].tags[key], points[1].tags[key]);
        }
        assert_ne!(points[0].tags["name"], points[1].tags["name"]);
    }

    #[test]
    fn errored_results_are_skipped() {
        let mut r = result("BM_E");
        r.error = Some("boom".into());
        assert!(results_to_points(&[r], &ctx()).is_empty());
    }

    #[test]
    fn validation() {
        let mut p = results_to_points(&[result("BM_X")], &ctx()).remove(0);
        p.fields.insert("bad".into(), f64::NAN);
        assert_eq!(p.validate(), Err(ModelError::NonFiniteField("bad".into())));
        p.fields.clear();
        assert_eq!(p.validate(), Err(ModelError::NoFields));
        p.measurement.clear();
        assert_eq!(p.validate(), Err(ModelError::EmptyMeasurement));
    }

    #[test]
    fn series_key_filters() {
        let key = SeriesKey::new("benchmark")
            .with_tag("branch", "master")
            .with_tag("name", "BM_X");
        let mut f = BTreeMap::new();
        assert!(key.matches(&f));
        f.insert("branch".to_owned(), "master".to_owned());
        assert!(key.matches(&f));
        f.insert("machine".to_owned(), "m".to_owned());
        assert!(!key.matches(&f));
    }
}
