//! Seeded synthetic series shared by tests across the workspace.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::{MeasurementPoint, SeriesKey};
use crate::store::Series;

pub const STEP_SEED: u64 = 20190101;
pub const STEP_BEFORE: usize = 40;
pub const STEP_AFTER: usize = 20;
/// Index of the first elevated point.
pub const STEP_INDEX: usize = STEP_BEFORE;
/// 2019-01-01T00:00:00Z.
pub const START_NS: i64 = 1_546_300_800_000_000_000;
pub const DAY_NS: i64 = 86_400_000_000_000;

/// 40 draws of N(100, 2) followed by 20 draws scaled by 1.3.
pub fn step_values(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(100.0, 2.0).expect("valid normal");
    (0..STEP_BEFORE + STEP_AFTER)
        .map(|i| {
            let v: f64 = noise.sample(&mut rng);
            if i < STEP_BEFORE {
                v
            } else {
                v * 1.3
            }
        })
        .collect()
}

/// Nightly timestamps: one per day from [`START_NS`].
pub fn timestamp(index: usize) -> i64 {
    START_NS + index as i64 * DAY_NS
}

pub fn step_key() -> SeriesKey {
    SeriesKey::new("benchmark")
        .with_tag("name", "BM_Step")
        .with_tag("branch", "master")
        .with_tag("machine", "fixture")
}

pub fn step_series(seed: u64) -> Series {
    series_from(step_key(), &step_values(seed))
}

pub fn series_from(key: SeriesKey, values: &[f64]) -> Series {
    Series {
        key,
        field: "real_time".to_owned(),
        points: values
            .iter()
            .enumerate()
            .map(|(i, &v)| (timestamp(i), v))
            .collect(),
    }
}

/// The series as `real_time` points ready for a store.
pub fn points_for(key: &SeriesKey, values: &[f64]) -> Vec<MeasurementPoint> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| MeasurementPoint {
            measurement: key.measurement.clone(),
            tags: key.tags.clone(),
            fields: BTreeMap::from([("real_time".to_owned(), v)]),
            timestamp_ns: timestamp(i),
        })
        .collect()
}
