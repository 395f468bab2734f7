//! HTTP facade over the SLA core library.
//!
//! Every handler is a thin composition of library calls: the catalog is
//! loaded once and shared read-only, and all SLA state lives in the store
//! directory.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value as JsonValue};
use sla_core::store::is_document_id;
use sla_core::{
    load_catalog, parse, validate_bytes, validate_document, Catalog, CatalogError, FileStore, ParseError,
    SlaStore, StoreError, StoredSlaSummary, ValidationReport,
};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub const DEFAULT_BODY_LIMIT: usize = 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub catalog_path: PathBuf,
    pub store_path: PathBuf,
    pub bind_address: SocketAddr,
    pub request_body_limit: usize,
    /// Built wizard assets, served under `/` when the directory exists.
    pub assets_dir: Option<PathBuf>,
    /// Exact origins allowed cross-origin. Empty means same-host only.
    pub allowed_origins: Vec<String>,
}

impl ServiceConfig {
    pub fn new(
        catalog_path: impl Into<PathBuf>,
        store_path: impl Into<PathBuf>,
        bind_address: SocketAddr,
    ) -> Self {
        Self {
            catalog_path: catalog_path.into(),
            store_path: store_path.into(),
            bind_address,
            request_body_limit: DEFAULT_BODY_LIMIT,
            assets_dir: None,
            allowed_origins: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("request body limit must be greater than zero")]
    ZeroBodyLimit,
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot serve on {addr}: {source}")]
    Io {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

/// Shared handler state.
#[derive(Clone)]
pub struct AppState {
    pub catalog: Arc<Catalog>,
    pub store: FileStore,
}

impl AppState {
    pub fn new(catalog: Catalog, store: FileStore) -> Self {
        Self {
            catalog: Arc::new(catalog),
            store,
        }
    }
}

/// Loads the catalog, opens the store and builds the router.
pub fn app(config: &ServiceConfig) -> Result<Router, ServiceError> {
    if config.request_body_limit == 0 {
        return Err(ServiceError::ZeroBodyLimit);
    }
    let catalog = load_catalog(&config.catalog_path)?;
    let store = FileStore::open(&config.store_path)?;
    let mut router = router(AppState::new(catalog, store), config.request_body_limit).layer(cors(config));
    if let Some(dir) = config.assets_dir.as_ref().filter(|d| d.is_dir()) {
        let assets = ServeDir::new(dir).not_found_service(axum::routing::any(not_found));
        router = router.fallback_service(assets);
    }
    Ok(router)
}

pub fn router(state: AppState, body_limit: usize) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/catalog/activities", get(list_activities))
        .route("/catalog/activities/{name}", get(activity_schema))
        .route("/catalog/application-slos", get(application_slos))
        .route("/sla/validate", post(validate))
        .route("/sla", post(create))
        .route("/slas", get(list_slas))
        .route("/slas/{id}", get(get_sla))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// Runs the service until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let app = app(&config)?;
    let addr = config.bind_address;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Io { addr, source })?;
    log::info!("listening on {}", listener.local_addr().unwrap_or(addr));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| ServiceError::Io { addr, source })
}

fn cors(config: &ServiceConfig) -> CorsLayer {
    let allow = if config.allowed_origins.is_empty() {
        let mut hosts = vec!["localhost".to_owned(), "127.0.0.1".to_owned(), "[::1]".to_owned()];
        let ip = config.bind_address.ip();
        if !ip.is_unspecified() {
            hosts.push(match ip {
                std::net::IpAddr::V6(v6) => format!("[{v6}]"),
                v4 => v4.to_string(),
            });
        }
        AllowOrigin::predicate(move |origin: &HeaderValue, _| {
            origin_host(origin).is_some_and(|h| hosts.iter().any(|x| x == h))
        })
    } else {
        AllowOrigin::list(
            config
                .allowed_origins
                .iter()
                .filter_map(|o| HeaderValue::from_str(o).ok()),
        )
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
        .allow_headers([header::CONTENT_TYPE])
}

fn origin_host(origin: &HeaderValue) -> Option<&str> {
    let rest = origin.to_str().ok()?.split_once("://")?.1;
    if rest.starts_with('[') {
        return rest.find(']').map(|end| &rest[..=end]);
    }
    Some(rest.split(':').next().unwrap_or(rest))
}

/// `{code, message}` error body. `path` is set for shape errors.
#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_owned(),
                message: message.into(),
                path: None,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<BytesRejection> for ApiError {
    fn from(r: BytesRejection) -> Self {
        if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "BODY_TOO_LARGE", r.body_text())
        } else {
            ApiError::new(r.status(), "JSON_SYNTAX", r.body_text())
        }
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        let mut err = ApiError::new(StatusCode::BAD_REQUEST, "JSON_SYNTAX", e.to_string());
        if let ParseError::SchemaShapeError { path, message } = e {
            err.body.path = Some(path);
            err.body.message = message;
        }
        err
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", e.to_string()),
            StoreError::StoreLocked { .. } => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "STORE_LOCKED", e.to_string())
            }
            other => {
                log::error!("{other}");
                ApiError::new(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    "STORE_ERROR",
                    other.to_string(),
                )
            }
        }
    }
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such resource")
}

/// `{name, deployment_layer, programming_model}` per activity, in manifest order.
pub fn activity_list(catalog: &Catalog) -> JsonValue {
    catalog
        .activities()
        .map(|a| {
            json!({
                "name": a.activity_name,
                "deployment_layer": a.deployment_layer,
                "programming_model": a.programming_model,
            })
        })
        .collect()
}

async fn list_activities(State(state): State<AppState>) -> Json<JsonValue> {
    Json(activity_list(&state.catalog))
}

async fn activity_schema(
    State(state): State<AppState>,
    Path(name): Path<String>,
) -> Result<Response, ApiError> {
    match state.catalog.resolve_activity_schema(&name) {
        Ok(schema) => Ok(Json(schema).into_response()),
        Err(e) => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "UNKNOWN_ACTIVITY",
            e.to_string(),
        )),
    }
}

async fn application_slos(State(state): State<AppState>) -> Response {
    Json(state.catalog.list_application_slos()).into_response()
}

async fn validate(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<ValidationReport>, ApiError> {
    let body = body?;
    Ok(Json(validate_bytes(&state.catalog, &body)?))
}

async fn create(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let body = body?;
    let report = validate_bytes(&state.catalog, &body)?;
    if !report.valid {
        return Ok((StatusCode::UNPROCESSABLE_ENTITY, Json(report)).into_response());
    }
    let doc = parse(&body)?;
    debug_assert!(validate_document(&state.catalog, &doc).valid);

    let store = state.store.clone();
    let id = blocking(move || store.put(&doc)).await?;
    let store = state.store.clone();
    let summary = blocking(move || store.list())
        .await?
        .into_iter()
        .find(|s| s.id == id);
    Ok((StatusCode::CREATED, Json(Created { id, summary })).into_response())
}

#[derive(Serialize)]
struct Created {
    id: String,
    summary: Option<StoredSlaSummary>,
}

async fn list_slas(State(state): State<AppState>) -> Result<Response, ApiError> {
    let store = state.store.clone();
    Ok(Json(blocking(move || store.list()).await?).into_response())
}

async fn get_sla(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    if !is_document_id(&id) {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "NOT_FOUND",
            format!("no stored SLA with id `{id}`"),
        ));
    }
    let store = state.store.clone();
    let bytes = blocking(move || store.get_canonical(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, StoreError> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "INTERNAL",
            e.to_string(),
        )),
    }
}
