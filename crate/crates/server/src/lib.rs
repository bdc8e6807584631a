//! HTTP front end over a survey snapshot.
//!
//! Every `/api` route renders a value from `gapscope_core::views`, so the
//! bodies match the command line byte for byte. The snapshot is held behind
//! an `Arc` and swapped whole on reload; requests that started earlier keep
//! the one they cloned.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use gapscope_core::snapshot::Snapshot;
use gapscope_core::views::{self, error_envelope, ViewError};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::Semaphore;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_RECOMMEND_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_WORKERS: usize = 2;

#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Where `/api/admin/reload` reads from; reload is refused without it.
    pub snapshot_dir: Option<PathBuf>,
    pub recommend_timeout: Duration,
    /// Upper bound on recommendations compiling at the same time.
    pub workers: usize,
    pub cors_origin: Option<String>,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            snapshot_dir: None,
            recommend_timeout: DEFAULT_RECOMMEND_TIMEOUT,
            workers: DEFAULT_WORKERS,
            cors_origin: None,
            static_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("invalid --cors-origin `{0}`")]
    CorsOrigin(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server stopped: {0}")]
    Io(#[from] std::io::Error),
}

pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
    workers: Arc<Semaphore>,
    options: ServerOptions,
}

impl AppState {
    pub fn new(snapshot: Snapshot, options: ServerOptions) -> Arc<Self> {
        Arc::new(AppState {
            snapshot: RwLock::new(Arc::new(snapshot)),
            workers: Arc::new(Semaphore::new(options.workers.max(1))),
            options,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    fn swap(&self, next: Snapshot) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(next);
    }
}

/// JSON body plus status, the only response shape the API produces.
struct ApiResponse(StatusCode, Value);

impl IntoResponse for ApiResponse {
    fn into_response(self) -> Response {
        let headers = [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))];
        (self.0, headers, views::to_json(&self.1)).into_response()
    }
}

fn ok(v: Value) -> ApiResponse {
    ApiResponse(StatusCode::OK, v)
}

fn status_of(e: &ViewError) -> StatusCode {
    match e {
        ViewError::BadRequest { .. } => StatusCode::BAD_REQUEST,
        ViewError::NotFound(_) => StatusCode::NOT_FOUND,
        ViewError::Capacity(_) => StatusCode::SERVICE_UNAVAILABLE,
    }
}

fn reply(r: Result<Value, ViewError>) -> ApiResponse {
    match r {
        Ok(v) => ok(v),
        Err(e) => ApiResponse(status_of(&e), e.envelope()),
    }
}

type Params = Query<BTreeMap<String, String>>;
type AppRef = State<Arc<AppState>>;

/// Parse a JSON body; an empty body means the request type's defaults.
fn body<T: serde::de::DeserializeOwned + Default>(bytes: &Bytes) -> Result<T, ViewError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| ViewError::bad("body", e.to_string()))
}

async fn survey(State(app): AppRef) -> ApiResponse {
    ok(views::survey(&app.snapshot()))
}

async fn papers(State(app): AppRef, Query(q): Params) -> ApiResponse {
    let snap = app.snapshot();
    reply(views::parse_filter(&q).and_then(|f| views::papers(&snap, &f)))
}

async fn timeline(State(app): AppRef, Query(q): Params) -> ApiResponse {
    let snap = app.snapshot();
    reply(views::parse_filter(&q).and_then(|f| views::timeline(&snap, &f)))
}

async fn taxonomy(State(app): AppRef, Query(q): Params) -> ApiResponse {
    reply(views::taxonomy(&app.snapshot(), q.get("name").map(String::as_str)))
}

async fn treemap(State(app): AppRef, Query(q): Params) -> ApiResponse {
    let name = q.get("taxonomy").map(String::as_str);
    reply(views::treemap_view(&app.snapshot(), name, q.get("level").map(String::as_str)))
}

async fn network(State(app): AppRef, Query(q): Params) -> ApiResponse {
    reply(views::network(&app.snapshot(), q.get("threshold").map(String::as_str)))
}

async fn affinity(State(app): AppRef) -> ApiResponse {
    ok(views::affinity(&app.snapshot()))
}

async fn affinity_summary(State(app): AppRef, bytes: Bytes) -> ApiResponse {
    let snap = app.snapshot();
    let req = serde_json::from_slice(&bytes).map_err(|e| ViewError::bad("body", e.to_string()));
    reply(req.and_then(|r| views::affinity_summary(&snap, &r)))
}

async fn insights(State(app): AppRef) -> ApiResponse {
    ok(views::insights(&app.snapshot()))
}

async fn count(State(app): AppRef) -> ApiResponse {
    ok(views::count(&app.snapshot()))
}

async fn validate(State(app): AppRef, bytes: Bytes) -> ApiResponse {
    let snap = app.snapshot();
    reply(body(&bytes).and_then(|r| views::validate(&snap, &r)))
}

async fn recommend(State(app): AppRef, bytes: Bytes) -> ApiResponse {
    let req: views::RecommendRequest = match body(&bytes) {
        Ok(r) => r,
        Err(e) => return reply(Err(e)),
    };
    let timeout = app.options.recommend_timeout;
    let deadline = Instant::now() + timeout;
    let capacity = || ViewError::Capacity(format!("recommendation exceeded {}s", timeout.as_secs_f64()));
    let snap = app.snapshot();
    let workers = app.workers.clone();
    let job = async move {
        let _permit = workers.acquire_owned().await.expect("semaphore never closes");
        tokio::task::spawn_blocking(move || views::recommend(&snap, &req, Some(deadline))).await
    };
    match tokio::time::timeout(timeout, job).await {
        Ok(Ok(result)) => reply(result),
        Ok(Err(join)) => ApiResponse(
            StatusCode::INTERNAL_SERVER_ERROR,
            error_envelope("internal", &join.to_string()),
        ),
        Err(_) => reply(Err(capacity())),
    }
}

async fn reload(State(app): AppRef) -> ApiResponse {
    let Some(dir) = app.options.snapshot_dir.clone() else {
        return reply(Err(ViewError::NotFound("server was started without a snapshot directory".into())));
    };
    let loaded = tokio::task::spawn_blocking(move || Snapshot::load(&dir)).await;
    match loaded {
        Ok(Ok(next)) => {
            let summary = json!({ "reloaded": true, "paper_count": next.corpus.papers.len() });
            app.swap(next);
            ok(summary)
        }
        Ok(Err(e)) => ApiResponse(StatusCode::INTERNAL_SERVER_ERROR, error_envelope("reload_failed", &e.to_string())),
        Err(e) => ApiResponse(StatusCode::INTERNAL_SERVER_ERROR, error_envelope("internal", &e.to_string())),
    }
}

async fn not_found() -> ApiResponse {
    ApiResponse(StatusCode::NOT_FOUND, error_envelope("not_found", "no such route"))
}

pub fn router(app: Arc<AppState>) -> Result<Router, ServeError> {
    let api = Router::new()
        .route("/survey", get(survey))
        .route("/papers", get(papers))
        .route("/timeline", get(timeline))
        .route("/taxonomy", get(taxonomy))
        .route("/treemap", get(treemap))
        .route("/network", get(network))
        .route("/affinity", get(affinity))
        .route("/affinity/summary", post(affinity_summary))
        .route("/insights", get(insights))
        .route("/count", get(count))
        .route("/validate", post(validate))
        .route("/recommend", post(recommend))
        .route("/admin/reload", post(reload))
        .fallback(not_found);
    let mut router = Router::new().nest("/api", api);
    router = match &app.options.static_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.fallback(not_found),
    };
    if let Some(origin) = &app.options.cors_origin {
        let value = HeaderValue::from_str(origin).map_err(|_| ServeError::CorsOrigin(origin.clone()))?;
        router = router.layer(
            CorsLayer::new()
                .allow_origin(value)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    Ok(router.with_state(app))
}

/// Bind and serve until the process is stopped.
pub async fn serve(snapshot: Snapshot, port: u16, options: ServerOptions) -> Result<(), ServeError> {
    let app = router(AppState::new(snapshot, options))?;
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    axum::serve(listener, app).await?;
    Ok(())
}
