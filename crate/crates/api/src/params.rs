//! Request parameter decoding shared by the query and alert endpoints.

use std::collections::{BTreeMap, BTreeSet};

use contbench::detector::{detect, DetectionPolicy, Direction};
use contbench::model::BENCHMARK_MEASUREMENT;
use contbench::store::{Aggregate, QuerySpec, Store, StoreError};
use contbench::{Annotation, RegressionEvent};

use crate::time::{parse_duration, parse_time};

pub type Params = [(String, String)];

fn split_list(value: &str) -> impl Iterator<Item = String> + '_ {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
}

fn number<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("parameter `{name}`: `{value}` is not a number"))
}

/// Parses `/api/v1/query` parameters into a validated spec.
pub fn parse_query(params: &Params, now_ns: i64) -> Result<QuerySpec, String> {
    let mut q = QuerySpec::new(String::new(), i64::MIN, now_ns);
    let mut from = None;
    let mut to = None;
    for (k, v) in params {
        if let Some(tag) = k.strip_prefix("tag.") {
            q.tag_filters.insert(tag.to_owned(), v.clone());
            continue;
        }
        match k.as_str() {
            "measurement" => q.measurement = v.clone(),
            "from" => from = Some(v),
            "to" => to = Some(v),
            "group_by" => q.group_by.extend(split_list(v)),
            "field" => q.fields.extend(split_list(v)),
            "aggregate" => {
                q.aggregate = Aggregate::parse(v).ok_or_else(|| {
                    format!(
                        "unknown aggregate `{v}`; expected none, mean, median, min, max or last"
                    )
                })?
            }
            "bucket" => q.bucket_ns = Some(parse_duration(v)?),
            _ => return Err(format!("unknown parameter `{k}`")),
        }
    }
    if q.measurement.is_empty() {
        return Err("parameter `measurement` is required".to_owned());
    }
    if let Some(from) = from {
        q.start_ns = parse_time(from, now_ns)?;
    }
    if let Some(to) = to {
        q.end_ns = parse_time(to, now_ns)?;
    }
    q.validate().map_err(|e| e.to_string())?;
    Ok(q)
}

/// Selection and policy for a detection pass over stored series.
#[derive(Debug, Clone, PartialEq)]
pub struct AlertQuery {
    pub measurement: String,
    pub tag_filters: BTreeMap<String, String>,
    pub fields: Vec<String>,
    pub start_ns: i64,
    pub end_ns: i64,
    /// Tags left out of series identity, so that e.g. successive commits
    /// form one history.
    pub ignore_tags: Vec<String>,
    pub policy: DetectionPolicy,
    /// `Some(false)` keeps only unsuppressed events, `Some(true)` only
    /// suppressed ones.
    pub suppressed: Option<bool>,
}

impl Default for AlertQuery {
    fn default() -> Self {
        Self {
            measurement: BENCHMARK_MEASUREMENT.to_owned(),
            tag_filters: BTreeMap::new(),
            fields: vec!["real_time".to_owned(), "cpu_time".to_owned()],
            start_ns: i64::MIN,
            end_ns: i64::MAX,
            ignore_tags: vec!["commit".to_owned()],
            policy: DetectionPolicy::default(),
            suppressed: None,
        }
    }
}

pub fn parse_alerts(params: &Params, now_ns: i64) -> Result<AlertQuery, String> {
    let mut q = AlertQuery {
        end_ns: now_ns,
        ..AlertQuery::default()
    };
    let mut fields = Vec::new();
    for (k, v) in params {
        if let Some(tag) = k.strip_prefix("tag.") {
            q.tag_filters.insert(tag.to_owned(), v.clone());
            continue;
        }
        match k.as_str() {
            "measurement" => q.measurement = v.clone(),
            "field" => fields.extend(split_list(v)),
            "ignore_tags" => q.ignore_tags = split_list(v).collect(),
            "from" => q.start_ns = parse_time(v, now_ns)?,
            "to" => q.end_ns = parse_time(v, now_ns)?,
            "window" => q.policy.window = number(k, v)?,
            "min_rel_change" => q.policy.min_rel_change = number(k, v)?,
            "noise_factor" => q.policy.noise_factor = number(k, v)?,
            "direction" => {
                q.policy.direction = match v.as_str() {
                    "higher_is_worse" => Direction::HigherIsWorse,
                    "lower_is_worse" => Direction::LowerIsWorse,
                    _ => return Err(format!("unknown direction `{v}`")),
                }
            }
            "suppressed" => {
                q.suppressed = Some(match v.as_str() {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(format!(
                            "parameter `suppressed` must be true or false, got `{v}`"
                        ))
                    }
                })
            }
            _ => return Err(format!("unknown parameter `{k}`")),
        }
    }
    if !fields.is_empty() {
        q.fields = fields;
    }
    q.policy.validate()?;
    if q.start_ns >= q.end_ns {
        return Err("time range start must be before its end".to_owned());
    }
    Ok(q)
}

/// Runs the detector over every stored history selected by `q`. A history
/// is the merge of all series that agree on every tag except `ignore_tags`.
pub fn detect_stored(
    store: &Store,
    q: &AlertQuery,
    annotations: &[Annotation],
) -> Result<Vec<RegressionEvent>, StoreError> {
    let group_by: BTreeSet<String> = store
        .list_series(&q.measurement, &q.tag_filters)
        .into_iter()
        .flat_map(|k| k.tags.into_keys())
        .filter(|t| !q.ignore_tags.contains(t))
        .collect();
    let spec = QuerySpec {
        measurement: q.measurement.clone(),
        tag_filters: q.tag_filters.clone(),
        fields: q.fields.clone(),
        start_ns: q.start_ns,
        end_ns: q.end_ns,
        group_by: group_by.into_iter().collect(),
        aggregate: Aggregate::None,
        bucket_ns: None,
    };
    let mut events = Vec::new();
    for series in store.query(&spec)? {
        events.extend(
            detect(&series, &q.policy, annotations)
                .into_iter()
                .filter(|e| q.suppressed.is_none_or(|s| e.suppressed == s)),
        );
    }
    Ok(events)
}
