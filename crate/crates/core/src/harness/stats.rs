use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Summary of per-repetition, per-iteration times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single sample.
    pub stddev: f64,
    /// Coefficient of variation, `stddev / mean`; 0 when the mean is 0.
    pub cv: f64,
}

pub fn aggregate_stats(samples: &[f64]) -> Result<RunStats, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptySamples);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let stddev = if samples.len() < 2 {
        0.0
    } else {
        let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    };
    let cv = if mean == 0.0 {
        0.0
    } else {
        (stddev / mean).abs()
    };
    Ok(RunStats {
        samples: samples.to_vec(),
        mean,
        median: median(samples),
        stddev,
        cv,
    })
}

/// Median with the midpoint rule for even lengths. `values` must be non-empty.
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// Keep the samples; `unstable` is set when the re-run budget ran out
    /// with the dispersion still above the threshold.
    Accept {
        unstable: bool,
    },
    Rerun,
}

pub fn check_stability(
    stats: &RunStats,
    cv_threshold: f64,
    reruns_done: usize,
    max_reruns: usize,
) -> Stability {
    let noisy = stats.cv > cv_threshold;
    if noisy && reruns_done < max_reruns {
        Stability::Rerun
    } else {
        Stability::Accept { unstable: noisy }
    }
}
