/// Upper bound on iterations per worker for a single measurement round.
pub const MAX_ITERATIONS: u64 = 1_000_000_000;

const MAX_GROWTH: f64 = 10.0;
const OVERSHOOT: f64 = 1.4;
const EPSILON_SECONDS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calibration {
    Done,
    Retry(u64),
}

/// Decides whether a measurement round that took `observed_seconds` for
/// `iterations` iterations is long enough, or how many iterations to try next.
///
/// The next count aims 40% past `min_time`, grows by at most 10x per step and
/// always by at least one iteration.
pub fn calibrate_iterations(observed_seconds: f64, iterations: u64, min_time: f64) -> Calibration {
    if observed_seconds >= min_time || iterations >= MAX_ITERATIONS {
        return Calibration::Done;
    }
    let iterations = iterations.max(1);
    let factor = (OVERSHOOT * min_time / observed_seconds.max(EPSILON_SECONDS)).min(MAX_GROWTH);
    let target = (iterations as f64 * factor).ceil();
    let next = if target.is_finite() && target < MAX_ITERATIONS as f64 {
        target as u64
    } else {
        MAX_ITERATIONS
    };
    Calibration::Retry(next.clamp(iterations + 1, MAX_ITERATIONS))
}
