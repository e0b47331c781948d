mod support;

use contbench::model::{MeasurementPoint, SeriesKey};
use contbench::store::{Aggregate, QuerySpec, Store, StoreOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracle::{random_point, random_query, same, Oracle};

fn point(host: &str, ts: i64, v: f64) -> MeasurementPoint {
    MeasurementPoint {
        measurement: "cpu".into(),
        tags: [("host".to_owned(), host.to_owned())].into(),
        fields: [("f0".to_owned(), v)].into(),
        timestamp_ns: ts,
    }
}

#[test]
fn random_queries_match_brute_force_scan() {
    let dir = tempfile::tempdir().unwrap();
    // Small segments so the data spans several files.
    let opts = StoreOptions {
        segment_max_bytes: 64 << 10,
    };
    let mut store = Store::open_with(dir.path(), opts).unwrap();
    let mut oracle = Oracle::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut written = 0;
    while written < 10_000 {
        let n = rng.random_range(1..200).min(10_000 - written);
        let batch: Vec<_> = (0..n).map(|_| random_point(&mut rng)).collect();
        let report = store.write_points(&batch).unwrap();
        assert_eq!(report.accepted + report.rejected.len(), n);
        oracle.write(&batch);
        written += n;
    }
    assert_eq!(store.value_count(), oracle.len());
    assert!(store.segment_count() > 1);

    let queries: Vec<QuerySpec> = (0..100).map(|_| random_query(&mut rng)).collect();
    let nonempty = queries
        .iter()
        .filter(|q| !oracle.query(q).is_empty())
        .count();
    assert!(nonempty >= 50, "only {nonempty} queries hit data");
    let check = |store: &Store, stage: &str| {
        for (i, q) in queries.iter().enumerate() {
            let got = store.query(q).unwrap();
            if let Err(e) = same(&got, &oracle.query(q)) {
                panic!("{stage}: query {i} {q:?}: {e}");
            }
        }
    };
    check(&store, "live");

    drop(store);
    let mut store = Store::open_with(dir.path(), opts).unwrap();
    check(&store, "reopened");

    store.compact().unwrap();
    check(&store, "compacted");
    drop(store);
    check(
        &Store::open(dir.path()).unwrap(),
        "reopened after compaction",
    );
}

#[test]
fn range_is_open_at_start_and_closed_at_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path()).unwrap();
    store
        .write_points(&[
            point("a", 10, 1.0),
            point("a", 20, 2.0),
            point("a", 30, 3.0),
        ])
        .unwrap();
    let got = store.query(&QuerySpec::new("cpu", 10, 20)).unwrap();
    assert_eq!(got[0].points, [(20, 2.0)]);
    let got = store.query(&QuerySpec::new("cpu", 9, 30)).unwrap();
    assert_eq!(got[0].points.len(), 3);
}

#[test]
fn appending_outside_the_range_leaves_results_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<_> = (0..500)
        .map(|i| point(["a", "b"][i % 2], rng.random_range(0..1000), rng.random()))
        .collect();
    store.write_points(&pts).unwrap();

    let mut q = QuerySpec::new("cpu", 0, 1000);
    q.aggregate = Aggregate::Mean;
    q.bucket_ns = Some(100);
    let before = store.query(&q).unwrap();

    store
        .write_points(&[point("a", 1001, 5.0), point("c", 0, 5.0)])
        .unwrap();
    assert_eq!(store.query(&q).unwrap(), before);

    // A new value inside the range can only add a point to a raw read.
    let raw = QuerySpec::new("cpu", 0, 1000);
    let n = store
        .query(&raw)
        .unwrap()
        .iter()
        .map(|s| s.points.len())
        .sum::<usize>();
    store.write_points(&[point("a", 1000, 5.0)]).unwrap();
    let m = store
        .query(&raw)
        .unwrap()
        .iter()
        .map(|s| s.points.len())
        .sum::<usize>();
    assert!(m == n || m == n + 1);
}

#[test]
fn acknowledged_writes_survive_reopen() {
    let dir = tempfile::tempdir().unwrap();
    {
        let mut store = Store::open(dir.path()).unwrap();
        store.write_points(&[point("a", 1, 1.0)]).unwrap();
        store
            .write_points(&[point("a", 1, 9.0), point("b", 2, 2.0)])
            .unwrap();
    }
    let store = Store::open(dir.path()).unwrap();
    let key = SeriesKey::new("cpu").with_tag("host", "a");
    assert_eq!(store.field_values(&key, "f0"), [(1, 9.0)]);
    assert_eq!(store.value_count(), 2);
}
