use std::collections::BTreeMap;

use crate::model::{MeasurementPoint, SeriesKey};

/// field -> timestamp -> value
pub(crate) type Fields = BTreeMap<String, BTreeMap<i64, f64>>;

/// In-memory view of everything committed to the segment log, with
/// last-write-wins per (series, field, timestamp).
#[derive(Debug, Default, Clone)]
pub(crate) struct Index {
    series: BTreeMap<SeriesKey, Fields>,
}

impl Index {
    pub fn apply(&mut self, point: &MeasurementPoint) {
        let fields = self.series.entry(point.series_key()).or_default();
        for (name, value) in &point.fields {
            fields
                .entry(name.clone())
                .or_default()
                .insert(point.timestamp_ns, *value);
        }
    }

    pub fn series(&self) -> impl Iterator<Item = (&SeriesKey, &Fields)> {
        self.series.iter()
    }

    pub fn get(&self, key: &SeriesKey) -> Option<&Fields> {
        self.series.get(key)
    }

    pub fn value_count(&self) -> usize {
        self.series
            .values()
            .flat_map(|f| f.values())
            .map(BTreeMap::len)
            .sum()
    }

    /// One point per (series, timestamp), fields merged, in key then time
    /// order.
    pub fn to_points(&self) -> Vec<MeasurementPoint> {
        let mut out = Vec::new();
        for (key, fields) in &self.series {
            let mut by_ts: BTreeMap<i64, BTreeMap<String, f64>> = BTreeMap::new();
            for (name, values) in fields {
                for (&ts, &v) in values {
                    by_ts.entry(ts).or_default().insert(name.clone(), v);
                }
            }
            out.extend(by_ts.into_iter().map(|(ts, fields)| MeasurementPoint {
                measurement: key.measurement.clone(),
                tags: key.tags.clone(),
                fields,
                timestamp_ns: ts,
            }));
        }
        out
    }
}
