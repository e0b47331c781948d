//! Threshold-vs-baseline change detection.
//!
//! For every point of a series the baseline is the median of the `window`
//! most recent eligible earlier points, and the noise level is their
//! coefficient of variation. A point is flagged when its relative change from
//! the baseline reaches `max(min_rel_change, noise_factor * cv)`.
//!
//! After any flagged point the series enters a new regime: earlier points
//! (and the flagged point itself) no longer feed the baseline, and detection
//! resumes once `window` points of the new regime are available. A step is
//! therefore reported once, and a flagged spike never leaks into later
//! baselines. Events that fall inside a matching false-positive annotation
//! are kept but marked `suppressed`.

mod annotation;
mod compare;

use serde::{Deserialize, Serialize};

use crate::harness::stats::median;
use crate::model::SeriesKey;
use crate::store::Series;

pub use annotation::{Annotation, AnnotationKind, SeriesSelector};
pub use compare::{compare_runs, ComparisonReport, ComparisonRow, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Times, memory: an increase is a regression.
    #[default]
    HigherIsWorse,
    /// Throughput-style counters: a decrease is a regression.
    LowerIsWorse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionPolicy {
    pub window: usize,
    pub min_rel_change: f64,
    pub noise_factor: f64,
    pub direction: Direction,
}

impl Default for DetectionPolicy {
    fn default() -> Self {
        Self {
            window: 10,
            min_rel_change: 0.10,
            noise_factor: 3.0,
            direction: Direction::HigherIsWorse,
        }
    }
}

impl DetectionPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.window < 2 {
            return Err(format!("window must be at least 2, got {}", self.window));
        }
        if !(self.min_rel_change > 0.0 && self.min_rel_change.is_finite()) {
            return Err("min_rel_change must be positive".to_owned());
        }
        if !(self.noise_factor >= 0.0 && self.noise_factor.is_finite()) {
            return Err("noise_factor must be non-negative".to_owned());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Regression,
    Improvement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionEvent {
    pub series: SeriesKey,
    pub field: String,
    /// Position of the flagged point in the series.
    pub index: usize,
    pub timestamp_ns: i64,
    pub baseline: f64,
    pub observed: f64,
    pub rel_change: f64,
    pub threshold_used: f64,
    pub kind: EventKind,
    pub suppressed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub value: f64,
    pub cv: f64,
}

/// Baseline for `points[at_index]` from the `policy.window` most recent
/// points before it whose `eligible` flag is set.
///
/// Returns `None` (skip, not failure) when `at_index < policy.window` or
/// fewer than two eligible points precede it.
pub fn compute_baseline(
    points: &[(i64, f64)],
    at_index: usize,
    policy: &DetectionPolicy,
    eligible: &[bool],
) -> Option<Baseline> {
    if at_index < policy.window || at_index > points.len() {
        return None;
    }
    let window: Vec<f64> = (0..at_index)
        .rev()
        .filter(|&i| eligible.get(i).copied().unwrap_or(true))
        .take(policy.window)
        .map(|i| points[i].1)
        .collect();
    if window.len() < 2 {
        return None;
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let cv = if mean == 0.0 {
        0.0
    } else {
        (var.sqrt() / mean).abs()
    };
    Some(Baseline {
        value: median(&window),
        cv,
    })
}

pub fn effective_threshold(cv: f64, policy: &DetectionPolicy) -> f64 {
    policy.min_rel_change.max(policy.noise_factor * cv)
}

/// Runs detection over one series.
pub fn detect(
    series: &Series,
    policy: &DetectionPolicy,
    annotations: &[Annotation],
) -> Vec<RegressionEvent> {
    let points = &series.points;
    let mut eligible = vec![true; points.len()];
    let mut regime_start = 0;
    let mut events = Vec::new();

    for i in 0..points.len() {
        if i - regime_start < policy.window {
            continue;
        }
        let Some(base) = compute_baseline(points, i, policy, &eligible) else {
            continue;
        };
        if base.value.is_nan() || base.value <= 0.0 {
            continue;
        }
        let (ts, observed) = points[i];
        let rel_change = (observed - base.value) / base.value;
        let threshold = effective_threshold(base.cv, policy);
        if rel_change.abs() < threshold {
            continue;
        }
        let worse = match policy.direction {
            Direction::HigherIsWorse => rel_change > 0.0,
            Direction::LowerIsWorse => rel_change < 0.0,
        };
        let suppressed = annotations.iter().any(|a| a.suppresses(&series.key, ts));
        events.push(RegressionEvent {
            series: series.key.clone(),
            field: series.field.clone(),
            index: i,
            timestamp_ns: ts,
            baseline: base.value,
            observed,
            rel_change,
            threshold_used: threshold,
            kind: if worse {
                EventKind::Regression
            } else {
                EventKind::Improvement
            },
            suppressed,
        });
        eligible[..=i].iter_mut().for_each(|e| *e = false);
        regime_start = i + 1;
    }
    events
}
