use std::collections::BTreeMap;
use std::sync::atomic::Ordering;
use std::sync::{MutexGuard, PoisonError, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use contbench::detector::{Annotation, AnnotationKind, SeriesSelector};
use contbench::model::{decode_line, SCHEMA_VERSION};
use contbench::store::Store;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::catalog::Catalog;
use crate::dashboard::{materialize, variable_options, Dashboard, Snapshot};
use crate::params::{detect_stored, parse_alerts, parse_query};
use crate::time::parse_time;
use crate::{ApiError, AppState};

type ApiResult<T = Json<Value>> = Result<T, ApiError>;
type Params = Result<Query<Vec<(String, String)>>, QueryRejection>;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/v1/write", post(write))
        .route("/api/v1/query", get(query))
        .route(
            "/api/v1/annotations",
            post(create_annotation)
                .get(list_annotations)
                .delete(delete_annotation_by_param),
        )
        .route("/api/v1/annotations/{id}", delete(delete_annotation))
        .route(
            "/api/v1/dashboards",
            post(create_dashboard)
                .get(list_dashboards)
                .put(replace_dashboard_from_body)
                .delete(delete_dashboard_by_param),
        )
        .route(
            "/api/v1/dashboards/{id}",
            get(get_dashboard)
                .put(replace_dashboard)
                .delete(delete_dashboard),
        )
        .route(
            "/api/v1/dashboards/{id}/variables",
            get(dashboard_variables),
        )
        .route("/api/v1/snapshots", post(create_snapshot))
        .route("/api/v1/snapshots/{id}", get(get_snapshot))
        .route("/api/v1/alerts", get(alerts))
        .route_layer(middleware::from_fn_with_state(state.clone(), authorize));
    Router::new()
        .route("/healthz", get(healthz))
        .merge(api)
        .with_state(state)
}

fn doc(mut body: Value) -> Json<Value> {
    if let Value::Object(map) = &mut body {
        map.insert("schema_version".into(), SCHEMA_VERSION.into());
    }
    Json(body)
}

fn params(p: Params) -> ApiResult<Vec<(String, String)>> {
    p.map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    b.map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request(e.body_text()))
}

fn read_store(state: &AppState) -> RwLockReadGuard<'_, Store> {
    state
        .inner
        .store
        .read()
        .unwrap_or_else(PoisonError::into_inner)
}

fn write_store(state: &AppState) -> RwLockWriteGuard<'_, Store> {
    state
        .inner
        .store
        .write()
        .unwrap_or_else(PoisonError::into_inner)
}

fn catalog(state: &AppState) -> MutexGuard<'_, Catalog> {
    state
        .inner
        .catalog
        .lock()
        .unwrap_or_else(PoisonError::into_inner)
}

/// Runs disk-touching work off the async workers.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn authorize(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.inner.token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError {
                status: StatusCode::UNAUTHORIZED,
                message: "missing or wrong bearer token".into(),
            }
            .into_response();
        }
    }
    next.run(req).await
}

async fn healthz() -> Json<Value> {
    doc(json!({ "status": "ok" }))
}

async fn write(State(state): State<AppState>, bytes: Bytes) -> ApiResult {
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| ApiError::bad_request(format!("body is not UTF-8: {e}")))?
        .to_owned();
    blocking(move || {
        let mut points = Vec::new();
        let mut line_numbers = Vec::new();
        let mut rejected = Vec::new();
        for (i, line) in text.split('\n').enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match decode_line(line) {
                Ok(p) => {
                    points.push(p);
                    line_numbers.push(i + 1);
                }
                Err(e) => rejected.push((i + 1, e.to_string())),
            }
        }
        let report = write_store(&state).write_points(&points)?;
        rejected.extend(
            report
                .rejected
                .into_iter()
                .map(|(idx, reason)| (line_numbers[idx], reason)),
        );
        rejected.sort();
        let rejected: Vec<Value> = rejected
            .into_iter()
            .map(|(line, reason)| json!({ "line": line, "reason": reason }))
            .collect();
        Ok(doc(
            json!({ "accepted": report.accepted, "rejected": rejected }),
        ))
    })
    .await
}

async fn query(State(state): State<AppState>, p: Params) -> ApiResult {
    let q = parse_query(&params(p)?, state.now()).map_err(ApiError::bad_request)?;
    blocking(move || {
        let series = read_store(&state).query(&q)?;
        Ok(doc(json!({
            "start_ns": q.start_ns,
            "end_ns": q.end_ns,
            "series": series,
        })))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct NewAnnotation {
    selector: SeriesSelector,
    start_ns: i64,
    end_ns: i64,
    kind: AnnotationKind,
    #[serde(default)]
    text: String,
    #[serde(default)]
    author: String,
}

async fn create_annotation(
    State(state): State<AppState>,
    b: Result<Json<NewAnnotation>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let n = body(b)?;
    let a = Annotation {
        id: String::new(),
        selector: n.selector,
        start_ns: n.start_ns,
        end_ns: n.end_ns,
        kind: n.kind,
        text: n.text,
        author: n.author,
        created_ns: state.now(),
    };
    a.validate().map_err(ApiError::bad_request)?;
    blocking(move || {
        let stored = catalog(&state).add_annotation(a)?;
        Ok((StatusCode::CREATED, doc(json!({ "annotation": stored }))))
    })
    .await
}

async fn list_annotations(State(state): State<AppState>, p: Params) -> ApiResult {
    let now = state.now();
    let mut start = i64::MIN;
    let mut end = i64::MAX;
    let mut measurement = None;
    let mut tags = BTreeMap::new();
    let mut kind = None;
    for (k, v) in params(p)? {
        if let Some(tag) = k.strip_prefix("tag.") {
            tags.insert(tag.to_owned(), v);
            continue;
        }
        match k.as_str() {
            "from" => start = parse_time(&v, now).map_err(ApiError::bad_request)?,
            "to" => end = parse_time(&v, now).map_err(ApiError::bad_request)?,
            "measurement" => measurement = Some(v),
            "kind" => {
                kind = Some(
                    serde_json::from_value::<AnnotationKind>(Value::String(v.clone()))
                        .map_err(|_| ApiError::bad_request(format!("unknown kind `{v}`")))?,
                )
            }
            _ => return Err(ApiError::bad_request(format!("unknown parameter `{k}`"))),
        }
    }
    // An annotation is listed when it could apply to a series selected by
    // the filter: no tag of the selector contradicts it.
    let annotations: Vec<Annotation> = catalog(&state)
        .annotations()
        .iter()
        .filter(|a| a.overlaps(start, end))
        .filter(|a| {
            measurement
                .as_ref()
                .is_none_or(|m| *m == a.selector.measurement)
        })
        .filter(|a| {
            tags.iter()
                .all(|(k, v)| a.selector.tags.get(k).is_none_or(|av| av == v))
        })
        .filter(|a| kind.is_none_or(|k| a.kind == k))
        .cloned()
        .collect();
    Ok(doc(json!({ "annotations": annotations })))
}

async fn remove_annotation(state: AppState, id: String) -> ApiResult {
    blocking(move || {
        if catalog(&state).delete_annotation(&id)? {
            Ok(doc(json!({ "deleted": id })))
        } else {
            Err(ApiError::not_found(format!("no annotation `{id}`")))
        }
    })
    .await
}

fn id_param(p: Params) -> ApiResult<String> {
    params(p)?
        .into_iter()
        .find(|(k, _)| k == "id")
        .map(|(_, v)| v)
        .ok_or_else(|| ApiError::bad_request("parameter `id` is required"))
}

async fn delete_annotation(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    remove_annotation(state, id).await
}

async fn delete_annotation_by_param(State(state): State<AppState>, p: Params) -> ApiResult {
    remove_annotation(state, id_param(p)?).await
}

async fn create_dashboard(
    State(state): State<AppState>,
    b: Result<Json<Dashboard>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let d = body(b)?;
    d.validate().map_err(ApiError::bad_request)?;
    blocking(move || {
        let mut cat = catalog(&state);
        if !d.id.is_empty() && cat.dashboard(&d.id).is_some() {
            return Err(ApiError {
                status: StatusCode::CONFLICT,
                message: format!("dashboard `{}` already exists", d.id),
            });
        }
        let stored = cat.put_dashboard(d)?;
        Ok((StatusCode::CREATED, doc(json!({ "dashboard": stored }))))
    })
    .await
}

async fn list_dashboards(State(state): State<AppState>) -> ApiResult {
    let all: Vec<Dashboard> = catalog(&state).dashboards().cloned().collect();
    Ok(doc(json!({ "dashboards": all })))
}

async fn get_dashboard(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    catalog(&state)
        .dashboard(&id)
        .map(|d| doc(json!({ "dashboard": d })))
        .ok_or_else(|| ApiError::not_found(format!("no dashboard `{id}`")))
}

async fn store_dashboard(state: AppState, d: Dashboard) -> ApiResult {
    if d.id.is_empty() {
        return Err(ApiError::bad_request("dashboard id is required"));
    }
    d.validate().map_err(ApiError::bad_request)?;
    blocking(move || {
        let stored = catalog(&state).put_dashboard(d)?;
        Ok(doc(json!({ "dashboard": stored })))
    })
    .await
}

async fn replace_dashboard(
    State(state): State<AppState>,
    Path(id): Path<String>,
    b: Result<Json<Dashboard>, JsonRejection>,
) -> ApiResult {
    let mut d = body(b)?;
    if !d.id.is_empty() && d.id != id {
        return Err(ApiError::bad_request(format!(
            "body id `{}` does not match path id `{id}`",
            d.id
        )));
    }
    d.id = id;
    store_dashboard(state, d).await
}

async fn replace_dashboard_from_body(
    State(state): State<AppState>,
    b: Result<Json<Dashboard>, JsonRejection>,
) -> ApiResult {
    store_dashboard(state, body(b)?).await
}

async fn remove_dashboard(state: AppState, id: String) -> ApiResult {
    blocking(move || {
        if catalog(&state).delete_dashboard(&id)? {
            Ok(doc(json!({ "deleted": id })))
        } else {
            Err(ApiError::not_found(format!("no dashboard `{id}`")))
        }
    })
    .await
}

async fn delete_dashboard(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    remove_dashboard(state, id).await
}

async fn delete_dashboard_by_param(State(state): State<AppState>, p: Params) -> ApiResult {
    remove_dashboard(state, id_param(p)?).await
}

async fn dashboard_variables(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let d = catalog(&state)
        .dashboard(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no dashboard `{id}`")))?;
    let store = read_store(&state);
    let vars: Vec<Value> = d
        .variables
        .iter()
        .map(|v| json!({ "name": v.name, "options": variable_options(&store, v) }))
        .collect();
    Ok(doc(json!({ "dashboard_id": id, "variables": vars })))
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TimeExpr {
    Ns(i64),
    Expr(String),
}

impl TimeExpr {
    fn resolve(&self, now: i64) -> Result<i64, ApiError> {
        match self {
            TimeExpr::Ns(ns) => Ok(*ns),
            TimeExpr::Expr(e) => parse_time(e, now).map_err(ApiError::bad_request),
        }
    }
}

#[derive(Debug, Deserialize)]
struct SnapshotRequest {
    dashboard_id: String,
    from: Option<TimeExpr>,
    to: Option<TimeExpr>,
    #[serde(default)]
    variables: BTreeMap<String, String>,
}

async fn create_snapshot(
    State(state): State<AppState>,
    b: Result<Json<SnapshotRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let req = body(b)?;
    let now = state.now();
    let dashboard = catalog(&state)
        .dashboard(&req.dashboard_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no dashboard `{}`", req.dashboard_id)))?;
    let start_ns = match &req.from {
        Some(t) => t.resolve(now)?,
        None => {
            parse_time(&dashboard.default_time_range.from, now).map_err(ApiError::bad_request)?
        }
    };
    let end_ns = match &req.to {
        Some(t) => t.resolve(now)?,
        None => parse_time(&dashboard.default_time_range.to, now).map_err(ApiError::bad_request)?,
    };
    if start_ns >= end_ns {
        return Err(ApiError::bad_request(
            "time range start must be before its end",
        ));
    }
    blocking(move || {
        let (variables, panels) = materialize(
            &read_store(&state),
            &dashboard,
            start_ns,
            end_ns,
            &req.variables,
        )
        .map_err(ApiError::bad_request)?;
        let seq = state.inner.snapshot_seq.fetch_add(1, Ordering::Relaxed);
        let id = format!("{:x}{:04x}", now, seq & 0xffff);
        let snapshot = Snapshot {
            schema_version: SCHEMA_VERSION.to_owned(),
            id: id.clone(),
            created_ns: now,
            start_ns,
            end_ns,
            variables,
            dashboard,
            panels,
        };
        let bytes =
            serde_json::to_vec_pretty(&snapshot).map_err(|e| ApiError::internal(e.to_string()))?;
        catalog(&state).save_snapshot(&id, &bytes)?;
        let url = format!("/api/v1/snapshots/{id}");
        Ok((StatusCode::CREATED, doc(json!({ "id": id, "url": url }))))
    })
    .await
}

async fn get_snapshot(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let bytes = blocking(move || Ok(catalog(&state).snapshot(&id)?.ok_or(id)))
        .await?
        .map_err(|id| ApiError::not_found(format!("no snapshot `{id}`")))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn alerts(State(state): State<AppState>, p: Params) -> ApiResult {
    let q = parse_alerts(&params(p)?, state.now()).map_err(ApiError::bad_request)?;
    blocking(move || {
        let annotations = catalog(&state).annotations().to_vec();
        let events = detect_stored(&read_store(&state), &q, &annotations)?;
        Ok(doc(json!({ "policy": q.policy, "events": events })))
    })
    .await
}
