use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::range::{expand_range, expand_thread_range};
use super::state::State;
use super::HarnessError;

pub type Body = Arc<dyn Fn(&mut State) + Send + Sync>;
pub type Hook = Arc<dyn Fn(&Fixture) + Send + Sync>;

/// What setup and teardown hooks get to see about the instance being run.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub params: Vec<i64>,
    pub thread_count: usize,
}

#[derive(Clone)]
pub struct Variant {
    /// Empty for a benchmark without type/strategy variants.
    pub label: String,
    pub body: Body,
}

impl fmt::Debug for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Variant")
            .field("label", &self.label)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    CpuTime,
    RealTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TimeUnit {
    #[default]
    #[serde(rename = "ns")]
    Nanosecond,
    #[serde(rename = "us")]
    Microsecond,
    #[serde(rename = "ms")]
    Millisecond,
    #[serde(rename = "s")]
    Second,
}

impl TimeUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::Nanosecond => "ns",
            TimeUnit::Microsecond => "us",
            TimeUnit::Millisecond => "ms",
            TimeUnit::Second => "s",
        }
    }

    pub fn per_second(self) -> f64 {
        match self {
            TimeUnit::Nanosecond => 1e9,
            TimeUnit::Microsecond => 1e6,
            TimeUnit::Millisecond => 1e3,
            TimeUnit::Second => 1.0,
        }
    }

    pub fn from_seconds(self, seconds: f64) -> f64 {
        seconds * self.per_second()
    }

    pub fn to_seconds(self, value: f64) -> f64 {
        value / self.per_second()
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamRange {
    pub low: i64,
    pub high: i64,
    pub multiplier: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThreadRange {
    pub low: usize,
    pub high: usize,
}

/// A registered benchmark: a named body (or several variants of it) plus the
/// parameter space it is run over.
#[derive(Clone)]
pub struct BenchmarkSpec {
    pub name: String,
    pub variants: Vec<Variant>,
    pub param_ranges: Vec<ParamRange>,
    pub thread_range: Option<ThreadRange>,
    pub clock_mode: ClockMode,
    pub time_unit: TimeUnit,
    /// Per-benchmark minimum measurement time; the runner default applies
    /// when unset.
    pub min_time: Option<f64>,
    pub setup: Option<Hook>,
    pub teardown: Option<Hook>,
    pub measure_memory: bool,
}

impl fmt::Debug for BenchmarkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkSpec")
            .field("name", &self.name)
            .field("variants", &self.variants)
            .field("param_ranges", &self.param_ranges)
            .field("thread_range", &self.thread_range)
            .field("clock_mode", &self.clock_mode)
            .field("time_unit", &self.time_unit)
            .field("min_time", &self.min_time)
            .field("measure_memory", &self.measure_memory)
            .finish_non_exhaustive()
    }
}

impl BenchmarkSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            variants: Vec::new(),
            param_ranges: Vec::new(),
            thread_range: None,
            clock_mode: ClockMode::default(),
            time_unit: TimeUnit::default(),
            min_time: None,
            setup: None,
            teardown: None,
            measure_memory: false,
        }
    }

    /// Adds the single, unlabelled body of a benchmark without variants.
    pub fn body<F>(self, body: F) -> Self
    where
        F: Fn(&mut State) + Send + Sync + 'static,
    {
        self.variant("", body)
    }

    /// Adds a labelled instantiation of the benchmark, reported as
    /// `name<label>`.
    pub fn variant<F>(mut self, label: impl Into<String>, body: F) -> Self
    where
        F: Fn(&mut State) + Send + Sync + 'static,
    {
        self.variants.push(Variant {
            label: label.into(),
            body: Arc::new(body),
        });
        self
    }

    pub fn range(mut self, low: i64, high: i64, multiplier: i64) -> Self {
        self.param_ranges.push(ParamRange {
            low,
            high,
            multiplier,
        });
        self
    }

    pub fn thread_range(mut self, low: usize, high: usize) -> Self {
        self.thread_range = Some(ThreadRange { low, high });
        self
    }

    pub fn threads(self, count: usize) -> Self {
        self.thread_range(count, count)
    }

    pub fn use_real_time(mut self) -> Self {
        self.clock_mode = ClockMode::RealTime;
        self
    }

    pub fn unit(mut self, unit: TimeUnit) -> Self {
        self.time_unit = unit;
        self
    }

    pub fn min_time(mut self, seconds: f64) -> Self {
        self.min_time = Some(seconds);
        self
    }

    /// Runs once per instance on the thread with index 0, before any worker
    /// starts iterating.
    pub fn setup<F>(mut self, hook: F) -> Self
    where
        F: Fn(&Fixture) + Send + Sync + 'static,
    {
        self.setup = Some(Arc::new(hook));
        self
    }

    /// Runs once per instance on the thread with index 0, after every worker
    /// has finished its last iteration.
    pub fn teardown<F>(mut self, hook: F) -> Self
    where
        F: Fn(&Fixture) + Send + Sync + 'static,
    {
        self.teardown = Some(Arc::new(hook));
        self
    }

    pub fn measure_memory(mut self) -> Self {
        self.measure_memory = true;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.name.is_empty() {
            return Err(HarnessError::EmptyName);
        }
        if self.variants.is_empty() {
            return Err(HarnessError::NoVariants(self.name.clone()));
        }
        let mut labels = HashSet::new();
        for v in &self.variants {
            if !labels.insert(v.label.as_str()) {
                return Err(HarnessError::DuplicateVariant {
                    name: self.name.clone(),
                    label: v.label.clone(),
                });
            }
        }
        for r in &self.param_ranges {
            expand_range(r.low, r.high, r.multiplier)?;
        }
        if let Some(t) = self.thread_range {
            expand_thread_range(t.low, t.high)?;
        }
        if let Some(m) = self.min_time {
            if !(m > 0.0 && m.is_finite()) {
                return Err(HarnessError::InvalidMinTime(m));
            }
        }
        Ok(())
    }

    /// Every concrete (variant, parameters, thread count) combination, in
    /// variant-major order.
    pub fn instances(&self) -> Result<Vec<Instance>, HarnessError> {
        let mut param_sets: Vec<Vec<i64>> = vec![Vec::new()];
        for r in &self.param_ranges {
            let values = expand_range(r.low, r.high, r.multiplier)?;
            param_sets = param_sets
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |&v| {
                        let mut next = prefix.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        let threads = match self.thread_range {
            Some(t) => expand_thread_range(t.low, t.high)?,
            None => vec![1],
        };
        let mut out = Vec::new();
        for (variant, v) in self.variants.iter().enumerate() {
            for params in &param_sets {
                for &thread_count in &threads {
                    out.push(Instance {
                        name: instance_name(
                            &self.name,
                            &v.label,
                            params,
                            self.thread_range.map(|_| thread_count),
                        ),
                        variant,
                        params: params.clone(),
                        thread_count,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// `base<variant>/p0/p1/threads:t`, omitting the parts that are not configured.
fn instance_name(base: &str, variant: &str, params: &[i64], threads: Option<usize>) -> String {
    let mut name = base.to_owned();
    if !variant.is_empty() {
        name.push('<');
        name.push_str(variant);
        name.push('>');
    }
    for p in params {
        name.push('/');
        name.push_str(&p.to_string());
    }
    if let Some(t) = threads {
        name.push_str("/threads:");
        name.push_str(&t.to_string());
    }
    name
}

/// One runnable combination of a registered benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub variant: usize,
    pub params: Vec<i64>,
    pub thread_count: usize,
}

/// Ordered collection of benchmark specs with unique names.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    specs: Vec<BenchmarkSpec>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates and appends `spec`, returning its position in registration
    /// order.
    pub fn register(&mut self, spec: BenchmarkSpec) -> Result<usize, HarnessError> {
        spec.validate()?;
        if self.specs.iter().any(|s| s.name == spec.name) {
            return Err(HarnessError::DuplicateName(spec.name));
        }
        self.specs.push(spec);
        Ok(self.specs.len() - 1)
    }

    pub fn specs(&self) -> &[BenchmarkSpec] {
        &self.specs
    }

    pub fn get(&self, index: usize) -> Option<&BenchmarkSpec> {
        self.specs.get(index)
    }

    /// All instances of all benchmarks, paired with the index of their spec.
    pub fn instances(&self) -> Vec<(usize, Instance)> {
        self.specs
            .iter()
            .enumerate()
            .flat_map(|(i, spec)| {
                // Validated at registration, so expansion cannot fail.
                spec.instances()
                    .unwrap_or_default()
                    .into_iter()
                    .map(move |inst| (i, inst))
            })
            .collect()
    }
}
