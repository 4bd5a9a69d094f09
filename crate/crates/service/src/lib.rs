//! JSON-over-HTTP front end to the gainpdf workflow.
//!
//! Sessions hold an immutable dataset and configuration. Frontier, density
//! and marginal-cost queries answer synchronously; matching and landscapes
//! run as background jobs polled through `GET /jobs/{id}`. Every numeric
//! payload is written with the same formatter as the command line artifacts,
//! so both front ends emit identical bytes for identical inputs.

mod api;
mod jobs;
mod session;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tower_http::cors::{Any, CorsLayer};

use gainpdf::io::to_json_string;
use gainpdf::ErrorClass;

pub use api::*;
pub use jobs::{JobKind, JobStatus, JobView};
pub use session::Session;

use jobs::Jobs;
use session::Sessions;

/// Shared state behind the router.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<Sessions>,
    jobs: Arc<Jobs>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Error response: `{"error": ..., "class": ...}` with the matching status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn not_found(what: &str, id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            body: ErrorBody {
                error: format!("unknown {what} {id:?}"),
                class: "not_found".into(),
            },
        }
    }

    fn bad_request(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                error: msg.into(),
                class: "validation".into(),
            },
        }
    }

    fn internal(msg: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: ErrorBody {
                error: msg.into(),
                class: "internal".into(),
            },
        }
    }
}

pub fn status_for(class: ErrorClass) -> StatusCode {
    match class {
        ErrorClass::Io | ErrorClass::Validation => StatusCode::BAD_REQUEST,
        ErrorClass::Infeasible => StatusCode::CONFLICT,
        ErrorClass::Numerical => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<gainpdf::Error> for ApiError {
    fn from(e: gainpdf::Error) -> Self {
        let class = e.class();
        ApiError {
            status: status_for(class),
            body: ErrorBody::from_error(&e),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, &self.body)
    }
}

fn json_response<S: Serialize>(status: StatusCode, value: &S) -> Response {
    match to_json_string(value) {
        Ok(body) => (
            status,
            [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
            body,
        )
            .into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn ok<S: Serialize>(value: &S) -> Response {
    json_response(StatusCode::OK, value)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text = if body.is_empty() { &b"{}"[..] } else { &body[..] };
    serde_json::from_slice(text).map_err(|e| ApiError::bad_request(format!("bad request body: {e}")))
}

/// Runs CPU-bound work off the async executor.
async fn blocking<R, F>(f: F) -> Result<R, ApiError>
where
    R: Send + 'static,
    F: FnOnce() -> Result<R, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info))
        .route("/sessions/{id}/frontier", post(frontier))
        .route("/sessions/{id}/pdf", get(pdf))
        .route("/sessions/{id}/match", post(start_match))
        .route("/sessions/{id}/marginal", post(marginal))
        .route("/sessions/{id}/landscape", post(start_landscape))
        .route("/jobs/{id}", get(job))
        .with_state(state)
}

/// Router with CORS for `origin` (any origin when `None`).
pub fn app(state: AppState, origin: Option<&str>) -> Result<Router, String> {
    let cors = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    let cors = match origin {
        Some(o) => cors.allow_origin(
            o.parse::<HeaderValue>()
                .map_err(|e| format!("bad CORS origin {o:?}: {e}"))?,
        ),
        None => cors.allow_origin(Any),
    };
    Ok(router(state).layer(cors))
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, origin: Option<&str>) -> std::io::Result<()> {
    let app = app(AppState::new(), origin).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse(&body)?;
    let sessions = st.sessions.clone();
    let info = blocking(move || {
        let s = Session::from_request(req)?;
        Ok(sessions.insert(s))
    })
    .await?;
    Ok(json_response(StatusCode::CREATED, &info))
}

async fn session_info(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(ok(&st.sessions.get(&id)?.info()))
}

async fn frontier(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let s = st.sessions.get(&id)?;
    let req: FrontierRequest = parse(&body)?;
    let f = blocking(move || Ok(s.frontier(&req)?)).await?;
    Ok(ok(&f))
}

async fn pdf(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PdfQuery>,
) -> Result<Response, ApiError> {
    let s = st.sessions.get(&id)?;
    let pdf = blocking(move || Ok(s.pdf(&q)?)).await?;
    Ok(ok(&pdf))
}

async fn start_match(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let s = st.sessions.get(&id)?;
    let req: MatchRequest = parse(&body)?;
    req.check()?;
    let job = st.jobs.spawn(JobKind::Match, move || {
        let out = s.run_match(&req)?;
        MatchPayload::from_outcome(&out)
    });
    Ok(json_response(StatusCode::ACCEPTED, &JobCreated { job_id: job }))
}

async fn marginal(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let s = st.sessions.get(&id)?;
    let req: gainpdf::workflow::MarginalRequest = parse(&body)?;
    let r = blocking(move || Ok(s.marginal(&req)?)).await?;
    Ok(ok(&r))
}

async fn start_landscape(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let s = st.sessions.get(&id)?;
    let req: LandscapeRequest = parse(&body)?;
    req.check()?;
    let job = st.jobs.spawn(JobKind::Landscape, move || s.landscape(&req));
    Ok(json_response(StatusCode::ACCEPTED, &JobCreated { job_id: job }))
}

async fn job(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(ok(&st.jobs.view(&id)?))
}
