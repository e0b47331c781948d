use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::index::Index;
use super::StoreError;
use crate::harness::stats::median;
use crate::model::SeriesKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    None,
    Mean,
    Median,
    Min,
    Max,
    Last,
}

impl Aggregate {
    /// Folds values given in series order (timestamp, then source series).
    pub fn fold(self, values: &[f64]) -> f64 {
        match self {
            Aggregate::None | Aggregate::Last => *values.last().expect("non-empty bucket"),
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregate::Median => median(values),
            Aggregate::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregate::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" => Aggregate::None,
            "mean" => Aggregate::Mean,
            "median" => Aggregate::Median,
            "min" => Aggregate::Min,
            "max" => Aggregate::Max,
            "last" => Aggregate::Last,
            _ => return None,
        })
    }
}

/// A filtered, time-bounded and optionally aggregated read.
///
/// The time range is `(start_ns, end_ns]`. Matching values are partitioned by
/// the `group_by` tag values and the field name. With an aggregate, each
/// partition is folded over buckets `[start + k*bucket, start + (k+1)*bucket)`
/// stamped with the bucket start; without `bucket_ns` the whole range is one
/// bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub measurement: String,
    #[serde(default)]
    pub tag_filters: BTreeMap<String, String>,
    /// Restricts the result to these fields; empty means all fields.
    #[serde(default)]
    pub fields: Vec<String>,
    pub start_ns: i64,
    pub end_ns: i64,
    #[serde(default)]
    pub group_by: Vec<String>,
    #[serde(default)]
    pub aggregate: Aggregate,
    #[serde(default)]
    pub bucket_ns: Option<i64>,
}

impl QuerySpec {
    pub fn new(measurement: impl Into<String>, start_ns: i64, end_ns: i64) -> Self {
        Self {
            measurement: measurement.into(),
            tag_filters: BTreeMap::new(),
            fields: Vec::new(),
            start_ns,
            end_ns,
            group_by: Vec::new(),
            aggregate: Aggregate::None,
            bucket_ns: None,
        }
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let invalid = |m: &str| Err(StoreError::InvalidQuery(m.to_owned()));
        if self.measurement.is_empty() {
            return invalid("measurement must not be empty");
        }
        if self.start_ns >= self.end_ns {
            return invalid("time range start must be before its end");
        }
        let mut seen = HashSet::new();
        if !self.group_by.iter().all(|g| seen.insert(g)) {
            return invalid("group_by keys must be distinct");
        }
        if self.bucket_ns.is_some_and(|b| b <= 0) {
            return invalid("bucket_ns must be positive");
        }
        Ok(())
    }

    pub(crate) fn group_key(&self, key: &SeriesKey) -> SeriesKey {
        SeriesKey {
            measurement: key.measurement.clone(),
            tags: self
                .group_by
                .iter()
                .filter_map(|g| key.tags.get(g).map(|v| (g.clone(), v.clone())))
                .collect(),
        }
    }

    fn wants_field(&self, field: &str) -> bool {
        self.fields.is_empty() || self.fields.iter().any(|f| f == field)
    }

    pub(crate) fn bucket_start(&self, ts: i64) -> i64 {
        match self.bucket_ns {
            Some(width) => {
                let offset =
                    (i128::from(ts) - i128::from(self.start_ns)).div_euclid(i128::from(width));
                (i128::from(self.start_ns) + offset * i128::from(width)) as i64
            }
            None => self.start_ns,
        }
    }
}

/// Values of one field for one (measurement, tag set) partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub key: SeriesKey,
    pub field: String,
    /// `(timestamp_ns, value)` in ascending timestamp order.
    pub points: Vec<(i64, f64)>,
}

pub(crate) fn evaluate(index: &Index, spec: &QuerySpec) -> Result<Vec<Series>, StoreError> {
    spec.validate()?;
    use std::ops::Bound::{Excluded, Included};

    // Source series are visited in key order, so a stable sort by timestamp
    // leaves ties ordered by source key.
    let mut groups: BTreeMap<(SeriesKey, String), Vec<(i64, f64)>> = BTreeMap::new();
    for (key, fields) in index.series() {
        if key.measurement != spec.measurement || !key.matches(&spec.tag_filters) {
            continue;
        }
        let group = spec.group_key(key);
        for (field, values) in fields {
            if !spec.wants_field(field) {
                continue;
            }
            let mut hits = values
                .range((Excluded(spec.start_ns), Included(spec.end_ns)))
                .map(|(&t, &v)| (t, v))
                .peekable();
            if hits.peek().is_none() {
                continue;
            }
            groups
                .entry((group.clone(), field.clone()))
                .or_default()
                .extend(hits);
        }
    }

    Ok(groups
        .into_iter()
        .map(|((key, field), mut points)| {
            points.sort_by_key(|&(t, _)| t);
            if spec.aggregate != Aggregate::None {
                points = bucketize(spec, &points);
            }
            Series { key, field, points }
        })
        .collect())
}

fn bucketize(spec: &QuerySpec, points: &[(i64, f64)]) -> Vec<(i64, f64)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let start = spec.bucket_start(points[i].0);
        let mut j = i;
        while j < points.len() && spec.bucket_start(points[j].0) == start {
            j += 1;
        }
        let values: Vec<f64> = points[i..j].iter().map(|&(_, v)| v).collect();
        out.push((start, spec.aggregate.fold(&values)));
        i = j;
    }
    out
}
