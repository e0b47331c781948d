use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::harness::BenchmarkResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Regression,
    Improvement,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub metric: String,
    pub unit: String,
    pub old: f64,
    pub new: f64,
    pub rel_change: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub threshold: f64,
    pub rows: Vec<ComparisonRow>,
    /// Present only in the new run.
    pub added: Vec<String>,
    /// Present only in the old run.
    pub removed: Vec<String>,
    /// Present in both, but errored in at least one.
    pub errored: Vec<String>,
}

impl ComparisonReport {
    pub fn regressions(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows
            .iter()
            .filter(|r| r.verdict == Verdict::Regression)
    }

    pub fn has_regression(&self) -> bool {
        self.regressions().next().is_some()
    }

    pub fn render_console(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain([9])
            .max()
            .unwrap_or(9);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$} {:<8} {:>14} {:>14} {:>9}  Verdict",
            "Benchmark", "Metric", "Old", "New", "Change"
        );
        let _ = writeln!(out, "{}", "-".repeat(width + 66));
        for r in &self.rows {
            let verdict = match r.verdict {
                Verdict::Regression => "REGRESSION",
                Verdict::Improvement => "improvement",
                Verdict::Unchanged => "unchanged",
            };
            let _ = writeln!(
                out,
                "{:<width$} {:<8} {:>11.3} {:<2} {:>11.3} {:<2} {:>+8.2}%  {verdict}",
                r.name,
                r.metric,
                r.old,
                r.unit,
                r.new,
                r.unit,
                r.rel_change * 100.0
            );
        }
        for (title, names) in [
            ("added", &self.added),
            ("removed", &self.removed),
            ("errored", &self.errored),
        ] {
            if !names.is_empty() {
                let _ = writeln!(out, "\n{title}:");
                for n in names {
                    let _ = writeln!(out, "  {n}");
                }
            }
        }
        out
    }
}

/// Joins two runs by result name and classifies the change of real and CPU
/// time per iteration against `min_rel_change`.
pub fn compare_runs(
    old: &[BenchmarkResult],
    new: &[BenchmarkResult],
    min_rel_change: f64,
) -> ComparisonReport {
    let old_by_name: BTreeMap<&str, &BenchmarkResult> =
        old.iter().map(|r| (r.name.as_str(), r)).collect();
    let new_names: BTreeMap<&str, &BenchmarkResult> =
        new.iter().map(|r| (r.name.as_str(), r)).collect();

    let mut report = ComparisonReport {
        threshold: min_rel_change,
        rows: Vec::new(),
        added: Vec::new(),
        removed: old_by_name
            .keys()
            .filter(|n| !new_names.contains_key(*n))
            .map(|n| (*n).to_owned())
            .collect(),
        errored: Vec::new(),
    };

    for n in new {
        let Some(o) = old_by_name.get(n.name.as_str()) else {
            report.added.push(n.name.clone());
            continue;
        };
        if o.is_error() || n.is_error() {
            report.errored.push(n.name.clone());
            continue;
        }
        // Compare in the old run's unit.
        let rescale = o.time_unit.per_second() / n.time_unit.per_second();
        for (metric, old_v, new_v) in [
            ("real_time", o.real_time_per_iter, n.real_time_per_iter),
            ("cpu_time", o.cpu_time_per_iter, n.cpu_time_per_iter),
        ] {
            let new_v = if rescale == 1.0 {
                new_v
            } else {
                new_v * rescale
            };
            let rel_change = if old_v > 0.0 {
                (new_v - old_v) / old_v
            } else {
                0.0
            };
            let verdict = if old_v <= 0.0 {
                Verdict::Unchanged
            } else if rel_change >= min_rel_change {
                Verdict::Regression
            } else if rel_change <= -min_rel_change {
                Verdict::Improvement
            } else {
                Verdict::Unchanged
            };
            report.rows.push(ComparisonRow {
                name: n.name.clone(),
                metric: metric.to_owned(),
                unit: o.time_unit.as_str().to_owned(),
                old: old_v,
                new: new_v,
                rel_change,
                verdict,
            });
        }
    }
    report
}
