use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use contbench::fixtures::{points_for, step_key, step_values, timestamp, STEP_INDEX, STEP_SEED};
use contbench::model::encode_lines;
use contbench::store::{QuerySpec, Store};
use contbench_api::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

const T: i64 = 1_700_000_000_000_000_000;
const HOUR: i64 = 3_600_000_000_000;

struct Service {
    app: Router,
    dir: tempfile::TempDir,
}

fn service() -> Service {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::open(dir.path())
        .unwrap()
        .with_clock(Arc::new(|| T));
    Service {
        app: router(state),
        dir,
    }
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let (status, bytes) = send(app, req.body(body).unwrap()).await;
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn write(app: &Router, text: &str) -> (StatusCode, Value) {
    let req = Request::post("/api/v1/write")
        .body(Body::from(text.to_owned()))
        .unwrap();
    let (status, bytes) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn line(branch: &str, ts: i64, v: f64) -> String {
    format!("benchmark,branch={branch},name=BM_X real_time={v} {ts}\n")
}

#[tokio::test]
async fn healthz() {
    let s = service();
    let (status, v) = call(&s.app, Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["schema_version"], "1");
}

#[tokio::test]
async fn write_reports_accepted_and_rejected_lines() {
    let s = service();
    let body = line("master", 1, 1.0) + &line("master", 2, 2.0);
    let (status, v) = write(&s.app, &body).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["accepted"], 2);
    assert_eq!(v["rejected"], json!([]));

    let body = line("master", 3, 3.0) + "benchmark real_time=oops 4\n";
    let (_, v) = write(&s.app, &body).await;
    assert_eq!(v["accepted"], 1);
    assert_eq!(v["rejected"][0]["line"], 2);
    assert!(v["rejected"][0]["reason"].as_str().unwrap().len() > 3);

    let (status, v) = write(&s.app, "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["accepted"], 0);

    let req = Request::post("/api/v1/write")
        .body(Body::from(vec![0xff, 0xfe]))
        .unwrap();
    assert_eq!(send(&s.app, req).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn failed_store_write_is_a_server_error_and_writes_nothing() {
    let s = service();
    let segments = s.dir.path().join("segments");
    std::fs::remove_dir_all(&segments).unwrap();
    std::fs::write(&segments, b"not a directory").unwrap();
    let (status, v) = write(&s.app, &line("master", 1, 1.0)).await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert!(v["error"].is_string());
    let (_, v) = call(
        &s.app,
        Method::GET,
        "/api/v1/query?measurement=benchmark",
        None,
    )
    .await;
    assert_eq!(v["series"], json!([]));
}

#[tokio::test]
async fn query_matches_direct_store_read() {
    let s = service();
    let mut body = String::new();
    for i in 0..50 {
        body += &line(["master", "dev"][i % 2], 1000 + i as i64, i as f64 * 0.5);
    }
    write(&s.app, &body).await;
    let (status, v) = call(
        &s.app,
        Method::GET,
        "/api/v1/query?measurement=benchmark&from=1000&to=1040&group_by=branch&aggregate=mean&bucket=10",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        (v["start_ns"].as_i64(), v["end_ns"].as_i64()),
        (Some(1000), Some(1040))
    );

    let mut spec = QuerySpec::new("benchmark", 1000, 1040);
    spec.group_by = vec!["branch".into()];
    spec.aggregate = contbench::Aggregate::Mean;
    spec.bucket_ns = Some(10);
    drop(s.app);
    let direct = Store::open(s.dir.path()).unwrap().query(&spec).unwrap();
    assert_eq!(v["series"], serde_json::to_value(&direct).unwrap());
    assert_eq!(direct.len(), 2);
}

#[tokio::test]
async fn query_over_empty_store_and_relative_range() {
    let s = service();
    let (status, v) = call(
        &s.app,
        Method::GET,
        "/api/v1/query?measurement=benchmark&from=now-1h",
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["series"], json!([]));
    assert_eq!(v["start_ns"].as_i64(), Some(T - HOUR));
    assert_eq!(v["end_ns"].as_i64(), Some(T));

    // (T - 1h, T]: the point at T - 1h is outside, the one at T inside.
    write(
        &s.app,
        &(line("master", T - HOUR, 1.0) + &line("master", T, 2.0)),
    )
    .await;
    let (_, v) = call(
        &s.app,
        Method::GET,
        "/api/v1/query?measurement=benchmark&from=now-1h&to=now",
        None,
    )
    .await;
    assert_eq!(v["series"][0]["points"], json!([[T, 2.0]]));
}

#[tokio::test]
async fn malformed_queries_are_client_errors() {
    let s = service();
    for uri in [
        "/api/v1/query",
        "/api/v1/query?measurement=benchmark&from=yesterday",
        "/api/v1/query?measurement=benchmark&aggregate=sum",
        "/api/v1/query?measurement=benchmark&bucket=0",
        "/api/v1/query?measurement=benchmark&from=now&to=now-1h",
    ] {
        let (status, v) = call(&s.app, Method::GET, uri, None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert!(!v["error"].as_str().unwrap().is_empty(), "{uri}");
    }
}

fn annotation(start: i64, end: i64, kind: &str) -> Value {
    json!({
        "selector": { "measurement": "benchmark", "tags": { "name": "BM_Step" } },
        "start_ns": start,
        "end_ns": end,
        "kind": kind,
        "text": "compiler upgrade",
    })
}

#[tokio::test]
async fn annotation_lifecycle() {
    let s = service();
    let (status, v) = call(
        &s.app,
        Method::POST,
        "/api/v1/annotations",
        Some(annotation(100, 200, "note")),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let id = v["annotation"]["id"].as_str().unwrap().to_owned();
    assert!(!id.is_empty());
    assert_eq!(v["annotation"]["created_ns"].as_i64(), Some(T));

    let (_, v) = call(
        &s.app,
        Method::GET,
        "/api/v1/annotations?from=150&to=300",
        None,
    )
    .await;
    assert_eq!(v["annotations"][0]["id"], id.as_str());
    let (_, v) = call(
        &s.app,
        Method::GET,
        "/api/v1/annotations?from=201&to=300",
        None,
    )
    .await;
    assert_eq!(v["annotations"], json!([]));
    let (_, v) = call(
        &s.app,
        Method::GET,
        "/api/v1/annotations?tag.name=BM_Other",
        None,
    )
    .await;
    assert_eq!(v["annotations"], json!([]));
    let (_, v) = call(
        &s.app,
        Method::GET,
        "/api/v1/annotations?tag.branch=master",
        None,
    )
    .await;
    assert_eq!(v["annotations"].as_array().unwrap().len(), 1);

    let uri = format!("/api/v1/annotations/{id}");
    assert_eq!(
        call(&s.app, Method::DELETE, &uri, None).await.0,
        StatusCode::OK
    );
    assert_eq!(
        call(&s.app, Method::DELETE, &uri, None).await.0,
        StatusCode::NOT_FOUND
    );
    let uri = format!("/api/v1/annotations?id={id}");
    assert_eq!(
        call(&s.app, Method::DELETE, &uri, None).await.0,
        StatusCode::NOT_FOUND
    );

    let (status, _) = call(
        &s.app,
        Method::POST,
        "/api/v1/annotations",
        Some(annotation(5, 1, "note")),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(
        &s.app,
        Method::POST,
        "/api/v1/annotations",
        Some(json!({"kind": "note"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn annotations_survive_restart() {
    let s = service();
    call(
        &s.app,
        Method::POST,
        "/api/v1/annotations",
        Some(annotation(1, 2, "false_positive")),
    )
    .await;
    let app = router(AppState::open(s.dir.path()).unwrap());
    let (_, v) = call(&app, Method::GET, "/api/v1/annotations", None).await;
    assert_eq!(v["annotations"].as_array().unwrap().len(), 1);
}

fn dashboard(id: &str, branch_filter: &str) -> Value {
    json!({
        "id": id,
        "title": "Nightly",
        "variables": [{ "name": "branch", "measurement": "benchmark", "tag": "branch" }],
        "panels": [{
            "id": "p1",
            "title": "BM_X real time",
            "query_template": {
                "measurement": "benchmark",
                "tag_filters": { "branch": branch_filter, "name": "BM_X" },
                "fields": ["real_time"]
            },
            "display": "timeseries"
        }],
        "default_time_range": { "from": "now-7d", "to": "now" }
    })
}

#[tokio::test]
async fn dashboard_crud_and_variables() {
    let s = service();
    let (status, v) = call(
        &s.app,
        Method::POST,
        "/api/v1/dashboards",
        Some(dashboard("", "$branch")),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let id = v["dashboard"]["id"].as_str().unwrap().to_owned();

    let (status, v) = call(
        &s.app,
        Method::POST,
        "/api/v1/dashboards",
        Some(dashboard("x", "$machine")),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("machine"));

    let (status, _) = call(
        &s.app,
        Method::POST,
        "/api/v1/dashboards",
        Some(dashboard(&id, "$branch")),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    write(
        &s.app,
        &(line("master", 1, 1.0) + &line("dev", 1, 1.0) + &line("dev", 2, 1.0)),
    )
    .await;
    let (_, v) = call(
        &s.app,
        Method::GET,
        &format!("/api/v1/dashboards/{id}/variables"),
        None,
    )
    .await;
    assert_eq!(v["variables"][0]["options"], json!(["dev", "master"]));

    let mut renamed = dashboard(&id, "$branch");
    renamed["title"] = "Renamed".into();
    let uri = format!("/api/v1/dashboards/{id}");
    assert_eq!(
        call(&s.app, Method::PUT, &uri, Some(renamed)).await.0,
        StatusCode::OK
    );
    let (_, v) = call(&s.app, Method::GET, &uri, None).await;
    assert_eq!(v["dashboard"]["title"], "Renamed");
    let (_, v) = call(&s.app, Method::GET, "/api/v1/dashboards", None).await;
    assert_eq!(v["dashboards"].as_array().unwrap().len(), 1);

    let (status, _) = call(
        &s.app,
        Method::PUT,
        &uri,
        Some(dashboard("other", "$branch")),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    assert_eq!(
        call(&s.app, Method::DELETE, &uri, None).await.0,
        StatusCode::OK
    );
    assert_eq!(
        call(&s.app, Method::GET, &uri, None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&s.app, Method::DELETE, &uri, None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn snapshots_are_self_contained() {
    let s = service();
    let mut body = String::new();
    for i in 0..5 {
        body += &line("master", T - (i + 1) * HOUR, 10.0 + i as f64);
    }
    body += &line("dev", T - HOUR, 99.0);
    write(&s.app, &body).await;
    call(
        &s.app,
        Method::POST,
        "/api/v1/dashboards",
        Some(dashboard("nightly", "$branch")),
    )
    .await;

    let req = json!({ "dashboard_id": "nightly", "from": "now-1d", "to": T, "variables": { "branch": "master" } });
    let (status, v) = call(&s.app, Method::POST, "/api/v1/snapshots", Some(req)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    let url = v["url"].as_str().unwrap().to_owned();
    assert_eq!(
        url,
        format!("/api/v1/snapshots/{}", v["id"].as_str().unwrap())
    );

    let (status, first) = send(&s.app, Request::get(&url).body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let snap: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(
        snap["panels"][0]["series"][0]["points"]
            .as_array()
            .unwrap()
            .len(),
        5
    );
    assert_eq!(snap["variables"]["branch"], "master");
    assert_eq!(snap["dashboard"]["id"], "nightly");

    write(&s.app, &line("master", T - 30 * 60_000_000_000, 1.0)).await;
    let (_, again) = send(&s.app, Request::get(&url).body(Body::empty()).unwrap()).await;
    assert_eq!(first, again);

    // Without a choice the first option ("dev") is used.
    let (_, v) = call(
        &s.app,
        Method::POST,
        "/api/v1/snapshots",
        Some(json!({ "dashboard_id": "nightly" })),
    )
    .await;
    let (_, other) = call(&s.app, Method::GET, v["url"].as_str().unwrap(), None).await;
    assert_eq!(other["variables"]["branch"], "dev");
    assert_ne!(other["id"], snap["id"]);

    let bad = json!({ "dashboard_id": "nightly", "variables": { "branch": "release" } });
    let (status, v) = call(&s.app, Method::POST, "/api/v1/snapshots", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("`branch`"));

    let (status, _) = call(
        &s.app,
        Method::POST,
        "/api/v1/snapshots",
        Some(json!({ "dashboard_id": "nope" })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(
        call(&s.app, Method::GET, "/api/v1/snapshots/feed", None)
            .await
            .0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn unresolvable_variable_is_named() {
    let s = service();
    call(
        &s.app,
        Method::POST,
        "/api/v1/dashboards",
        Some(dashboard("d", "$branch")),
    )
    .await;
    let (status, v) = call(
        &s.app,
        Method::POST,
        "/api/v1/snapshots",
        Some(json!({ "dashboard_id": "d" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("`branch`"), "{v}");
}

async fn write_step_fixture(app: &Router) {
    let points = points_for(&step_key(), &step_values(STEP_SEED));
    let (_, v) = write(app, &encode_lines(&points)).await;
    assert_eq!(v["accepted"], 60);
}

#[tokio::test]
async fn alerts_over_constant_and_step_series() {
    let s = service();
    let mut body = String::new();
    for i in 0..30 {
        body += &line("master", timestamp(i), 100.0);
    }
    write(&s.app, &body).await;
    let (status, v) = call(&s.app, Method::GET, "/api/v1/alerts", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["events"], json!([]));

    write_step_fixture(&s.app).await;
    let (_, v) = call(
        &s.app,
        Method::GET,
        "/api/v1/alerts?window=10&min_rel_change=0.10",
        None,
    )
    .await;
    let events = v["events"].as_array().unwrap();
    assert_eq!(events.len(), 1, "{v}");
    assert_eq!(events[0]["index"], STEP_INDEX);
    assert_eq!(events[0]["kind"], "regression");
    assert_eq!(events[0]["suppressed"], false);

    let t = timestamp(STEP_INDEX);
    call(
        &s.app,
        Method::POST,
        "/api/v1/annotations",
        Some(annotation(t, t, "false_positive")),
    )
    .await;
    let (_, v) = call(&s.app, Method::GET, "/api/v1/alerts?suppressed=false", None).await;
    assert_eq!(v["events"], json!([]));
    let (_, v) = call(&s.app, Method::GET, "/api/v1/alerts", None).await;
    assert_eq!(v["events"][0]["suppressed"], true);

    let (status, _) = call(&s.app, Method::GET, "/api/v1/alerts?window=0", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn bearer_token_is_enforced_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(
        AppState::open(dir.path())
            .unwrap()
            .with_token(Some("s3cret".into())),
    );
    assert_eq!(
        call(&app, Method::GET, "/healthz", None).await.0,
        StatusCode::OK
    );
    let uri = "/api/v1/query?measurement=benchmark";
    assert_eq!(
        call(&app, Method::GET, uri, None).await.0,
        StatusCode::UNAUTHORIZED
    );
    let wrong = Request::get(uri)
        .header(header::AUTHORIZATION, "Bearer nope")
        .body(Body::empty())
        .unwrap();
    assert_eq!(send(&app, wrong).await.0, StatusCode::UNAUTHORIZED);
    let right = Request::get(uri)
        .header(header::AUTHORIZATION, "Bearer s3cret")
        .body(Body::empty())
        .unwrap();
    assert_eq!(send(&app, right).await.0, StatusCode::OK);
}

#[tokio::test]
async fn alert_history_spans_commits() {
    let s = service();
    let values = step_values(STEP_SEED);
    let mut body = String::new();
    for (i, v) in values.iter().enumerate() {
        body += &format!(
            "benchmark,commit=c{i},name=BM_Step real_time={v} {}\n",
            timestamp(i)
        );
    }
    write(&s.app, &body).await;
    let (_, v) = call(&s.app, Method::GET, "/api/v1/alerts", None).await;
    let events = v["events"].as_array().unwrap();
    assert_eq!(events.len(), 1, "{v}");
    assert_eq!(events[0]["series"]["tags"], json!({ "name": "BM_Step" }));
    let (_, v) = call(&s.app, Method::GET, "/api/v1/alerts?ignore_tags=", None).await;
    assert_eq!(v["events"], json!([]));
}
