//! HTTP service over a contbench data directory.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/api/v1/write` | wire-format lines |
//! | GET | `/api/v1/query` | `measurement`, `tag.<k>`, `from`, `to`, `group_by`, `aggregate`, `bucket`, `field` |
//! | POST, GET, DELETE | `/api/v1/annotations[/{id}]` | |
//! | POST, GET, PUT, DELETE | `/api/v1/dashboards[/{id}]` | plus `/{id}/variables` |
//! | POST | `/api/v1/snapshots` | `GET /api/v1/snapshots/{id}` returns it unchanged |
//! | GET | `/api/v1/alerts` | detector over stored series |
//! | GET | `/healthz` | |
//!
//! Times accept nanoseconds, `now` or `now-<N><s|m|h|d>`. Every JSON
//! response carries `schema_version`.

mod catalog;
mod dashboard;
mod handlers;
mod params;
mod time;

use std::future::Future;
use std::io;
use std::path::Path;
use std::sync::atomic::AtomicU64;
use std::sync::{Arc, Mutex, RwLock};

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use contbench::model::{RunContext, SCHEMA_VERSION};
use contbench::store::{Store, StoreError};
use serde_json::json;
use tokio::net::TcpListener;

pub use catalog::Catalog;
pub use dashboard::{
    materialize, resolve_variables, variable_options, Dashboard, Display, Panel, PanelData,
    PanelQuery, Snapshot, TimeRange, Variable,
};
pub use handlers::router;
pub use params::{detect_stored, parse_alerts, parse_query, AlertQuery};
pub use time::{parse_duration, parse_time};

pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    store: RwLock<Store>,
    catalog: Mutex<Catalog>,
    token: Option<String>,
    clock: Clock,
    snapshot_seq: AtomicU64,
}

impl AppState {
    /// Opens (creating if needed) the store and catalogs under `dir`.
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref();
        let store = Store::open(dir).map_err(io::Error::other)?;
        let catalog = Catalog::open(dir)?;
        Ok(Self {
            inner: Arc::new(Inner {
                store: RwLock::new(store),
                catalog: Mutex::new(catalog),
                token: None,
                clock: Arc::new(RunContext::now_ns),
                snapshot_seq: AtomicU64::new(0),
            }),
        })
    }

    fn map(self, f: impl FnOnce(&mut Inner)) -> Self {
        let mut inner = Arc::into_inner(self.inner).expect("configure before sharing");
        f(&mut inner);
        Self {
            inner: Arc::new(inner),
        }
    }

    /// Requires `Authorization: Bearer <token>` on every `/api` request.
    pub fn with_token(self, token: Option<String>) -> Self {
        self.map(|i| i.token = token)
    }

    /// Replaces the wall clock used to resolve `now`.
    pub fn with_clock(self, clock: Clock) -> Self {
        self.map(|i| i.clock = clock)
    }

    fn now(&self) -> i64 {
        (self.inner.clock)()
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: message.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::InvalidQuery(m) => Self::bad_request(m),
            other => Self::internal(other.to_string()),
        }
    }
}

impl From<io::Error> for ApiError {
    fn from(e: io::Error) -> Self {
        Self::internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "schema_version": SCHEMA_VERSION, "error": self.message });
        (self.status, Json(body)).into_response()
    }
}

/// Serves `state` on `listener` until `shutdown` resolves, then drains
/// in-flight requests.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
