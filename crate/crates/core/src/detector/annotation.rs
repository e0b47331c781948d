use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::SeriesKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    /// Marks a time range whose alerts are known noise.
    FalsePositive,
    Note,
}

/// Selects series by measurement and a subset of their tags.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeriesSelector {
    pub measurement: String,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

impl SeriesSelector {
    pub fn matches(&self, key: &SeriesKey) -> bool {
        self.measurement == key.measurement && key.matches(&self.tags)
    }
}

/// Human-authored marker over a closed time range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: String,
    pub selector: SeriesSelector,
    pub start_ns: i64,
    pub end_ns: i64,
    pub kind: AnnotationKind,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub created_ns: i64,
}

impl Annotation {
    pub fn validate(&self) -> Result<(), String> {
        if self.start_ns > self.end_ns {
            return Err(format!(
                "annotation start {} is after its end {}",
                self.start_ns, self.end_ns
            ));
        }
        if self.selector.measurement.is_empty() {
            return Err("annotation selector needs a measurement".to_owned());
        }
        Ok(())
    }

    /// True for a false-positive annotation over `key` containing `ts`.
    pub fn suppresses(&self, key: &SeriesKey, ts: i64) -> bool {
        self.kind == AnnotationKind::FalsePositive
            && self.start_ns <= ts
            && ts <= self.end_ns
            && self.selector.matches(key)
    }

    /// True if the annotation's range intersects `[start, end]`.
    pub fn overlaps(&self, start: i64, end: i64) -> bool {
        self.start_ns <= end && start <= self.end_ns
    }
}
