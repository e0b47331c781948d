//! Brute-force reference for store queries: a flat list of stored values
//! scanned in full for every query.

use std::collections::BTreeMap;

use contbench::model::{MeasurementPoint, SeriesKey};
use contbench::store::{Aggregate, QuerySpec, Series};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Cell {
    measurement: String,
    tags: Vec<(String, String)>,
    field: String,
    ts: i64,
}

#[derive(Default)]
pub struct Oracle {
    cells: std::collections::HashMap<Cell, f64>,
}

impl Oracle {
    /// Mirrors a write: points with a non-finite field are dropped whole.
    pub fn write(&mut self, points: &[MeasurementPoint]) {
        for p in points {
            if p.fields.is_empty() || p.fields.values().any(|v| !v.is_finite()) {
                continue;
            }
            for (field, &v) in &p.fields {
                let cell = Cell {
                    measurement: p.measurement.clone(),
                    tags: p.tags.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
                    field: field.clone(),
                    ts: p.timestamp_ns,
                };
                self.cells.insert(cell, v);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn query(&self, q: &QuerySpec) -> Vec<Series> {
        let mut hits: Vec<(&Cell, f64)> = Vec::new();
        for (cell, &v) in &self.cells {
            let tag = |k: &str| cell.tags.iter().find(|(tk, _)| tk == k).map(|(_, tv)| tv);
            let keep = cell.measurement == q.measurement
                && q.tag_filters.iter().all(|(k, v)| tag(k) == Some(v))
                && (q.fields.is_empty() || q.fields.contains(&cell.field))
                && cell.ts > q.start_ns
                && cell.ts <= q.end_ns;
            if keep {
                hits.push((cell, v));
            }
        }
        // Time, then full source key, gives the tie order.
        hits.sort_by(|a, b| {
            (a.0.ts, &a.0.measurement, &a.0.tags).cmp(&(b.0.ts, &b.0.measurement, &b.0.tags))
        });

        let mut groups: BTreeMap<(SeriesKey, String), Vec<(i64, f64)>> = BTreeMap::new();
        for (cell, v) in hits {
            let mut key = SeriesKey::new(cell.measurement.clone());
            for g in &q.group_by {
                if let Some((_, tv)) = cell.tags.iter().find(|(tk, _)| tk == g) {
                    key = key.with_tag(g.clone(), tv.clone());
                }
            }
            groups
                .entry((key, cell.field.clone()))
                .or_default()
                .push((cell.ts, v));
        }

        groups
            .into_iter()
            .map(|((key, field), pts)| {
                let points = if q.aggregate == Aggregate::None {
                    pts
                } else {
                    aggregate(q, &pts)
                };
                Series { key, field, points }
            })
            .collect()
    }
}

fn bucket_of(q: &QuerySpec, ts: i64) -> i64 {
    match q.bucket_ns {
        None => q.start_ns,
        Some(w) => {
            let (s, t, w) = (q.start_ns as i128, ts as i128, w as i128);
            let mut k = (t - s) / w;
            if (t - s) % w < 0 {
                k -= 1;
            }
            (s + k * w) as i64
        }
    }
}

fn aggregate(q: &QuerySpec, pts: &[(i64, f64)]) -> Vec<(i64, f64)> {
    let mut buckets: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for &(t, v) in pts {
        buckets.entry(bucket_of(q, t)).or_default().push(v);
    }
    buckets
        .into_iter()
        .map(|(b, vs)| {
            let out = match q.aggregate {
                Aggregate::None | Aggregate::Last => vs[vs.len() - 1],
                Aggregate::Mean => {
                    let mut sum = 0.0;
                    for v in &vs {
                        sum += v;
                    }
                    sum / vs.len() as f64
                }
                Aggregate::Median => {
                    let mut s = vs.clone();
                    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let n = s.len();
                    if n % 2 == 1 {
                        s[n / 2]
                    } else {
                        (s[n / 2 - 1] + s[n / 2]) / 2.0
                    }
                }
                Aggregate::Min => vs.iter().copied().reduce(f64::min).unwrap(),
                Aggregate::Max => vs.iter().copied().reduce(f64::max).unwrap(),
            };
            (b, out)
        })
        .collect()
}

pub const TS_SPAN: i64 = 5_000;
const HOSTS: [&str; 4] = ["h0", "h1", "h2", "h3"];
const REGIONS: [&str; 3] = ["eu", "us", "ap"];
const MEASUREMENTS: [&str; 2] = ["cpu", "mem"];
const FIELDS: [&str; 3] = ["f0", "f1", "f2"];

pub fn random_point(rng: &mut impl Rng) -> MeasurementPoint {
    let mut tags = BTreeMap::new();
    tags.insert(
        "host".to_owned(),
        HOSTS[rng.random_range(0..HOSTS.len())].to_owned(),
    );
    if rng.random_bool(0.7) {
        tags.insert(
            "region".to_owned(),
            REGIONS[rng.random_range(0..REGIONS.len())].to_owned(),
        );
    }
    let mut fields = BTreeMap::new();
    for f in FIELDS {
        if fields.is_empty() || rng.random_bool(0.4) {
            let v = if rng.random_bool(0.002) {
                f64::NAN
            } else {
                rng.random_range(-1e3..1e3)
            };
            fields.insert(f.to_owned(), v);
        }
    }
    MeasurementPoint {
        measurement: MEASUREMENTS[rng.random_range(0..MEASUREMENTS.len())].to_owned(),
        tags,
        fields,
        timestamp_ns: rng.random_range(-TS_SPAN..TS_SPAN),
    }
}

pub fn random_query(rng: &mut impl Rng) -> QuerySpec {
    let a = rng.random_range(-TS_SPAN - 10..TS_SPAN + 10);
    let b = rng.random_range(-TS_SPAN - 10..TS_SPAN + 10);
    let (start, end) = if a == b {
        (a, a + 1)
    } else {
        (a.min(b), a.max(b))
    };
    let mut q = QuerySpec::new(
        MEASUREMENTS[rng.random_range(0..MEASUREMENTS.len())],
        start,
        end,
    );
    if rng.random_bool(0.4) {
        q.tag_filters.insert(
            "host".into(),
            HOSTS[rng.random_range(0..HOSTS.len())].into(),
        );
    }
    if rng.random_bool(0.3) {
        q.tag_filters.insert(
            "region".into(),
            REGIONS[rng.random_range(0..REGIONS.len())].into(),
        );
    }
    if rng.random_bool(0.3) {
        q.fields
            .push(FIELDS[rng.random_range(0..FIELDS.len())].into());
    }
    for g in ["host", "region"] {
        if rng.random_bool(0.4) {
            q.group_by.push(g.into());
        }
    }
    if rng.random_bool(0.3) {
        q.group_by.reverse();
    }
    q.aggregate = [
        Aggregate::None,
        Aggregate::Mean,
        Aggregate::Median,
        Aggregate::Min,
        Aggregate::Max,
        Aggregate::Last,
    ][rng.random_range(0..6)];
    if rng.random_bool(0.6) {
        q.bucket_ns = Some(rng.random_range(1..2_000));
    }
    q
}

/// Bitwise comparison of a store answer against the oracle's.
pub fn same(got: &[Series], want: &[Series]) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{} series, expected {}", got.len(), want.len()));
    }
    for (g, w) in got.iter().zip(want) {
        if g.key != w.key || g.field != w.field {
            return Err(format!(
                "series {} {} vs {} {}",
                g.key, g.field, w.key, w.field
            ));
        }
        if g.points.len() != w.points.len() {
            return Err(format!(
                "{} {}: {} points, expected {}",
                g.key,
                g.field,
                g.points.len(),
                w.points.len()
            ));
        }
        for (a, b) in g.points.iter().zip(&w.points) {
            if a.0 != b.0 || a.1.to_bits() != b.1.to_bits() {
                return Err(format!("{} {}: {a:?} vs {b:?}", g.key, g.field));
            }
        }
    }
    Ok(())
}
