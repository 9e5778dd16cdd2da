//! JSON-over-HTTP front end.
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/listeners` | `{"handle"?}` → `{"listener_id"}` |
//! | GET | `/campaigns/{id}/next?listener=` | trial payload or `{"status":"complete"}` |
//! | POST | `/campaigns/{id}/ratings` | `{"listener","trial_id","scores":{key: 0..=100}}` |
//! | GET | `/campaigns/{id}/report.csv` | aggregate as CSV |
//! | GET | `/audio/{key}` | stimulus bytes |

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::service::{RatingSubmission, Service};
use crate::EvalError;

pub type SharedService = Arc<Mutex<Service>>;

struct ApiError(StatusCode, String);

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        let status = match e {
            EvalError::UnknownCampaign(_) | EvalError::UnknownListener(_) | EvalError::UnknownTrial(_) => {
                StatusCode::NOT_FOUND
            }
            EvalError::UnknownKey(_) | EvalError::ScoreOutOfRange { .. } | EvalError::Unrated(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn lock(state: &SharedService) -> std::sync::MutexGuard<'_, Service> {
    // A panic while holding the lock leaves state that was valid before the
    // panicking call; keep serving.
    state.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Deserialize)]
struct Registration {
    #[serde(default)]
    handle: String,
}

async fn register(State(state): State<SharedService>, body: Bytes) -> Result<Response, ApiError> {
    let reg: Registration = if body.iter().all(u8::is_ascii_whitespace) {
        Registration { handle: String::new() }
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?
    };
    let id = lock(&state).register(&reg.handle)?;
    Ok((StatusCode::CREATED, Json(json!({ "listener_id": id }))).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    listener: String,
}

async fn next(
    State(state): State<SharedService>,
    Path(id): Path<String>,
    Query(q): Query<NextQuery>,
) -> Result<Response, ApiError> {
    let payload = lock(&state).next_trial(&id, &q.listener)?;
    Ok(Json(payload).into_response())
}

async fn ratings(State(state): State<SharedService>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let submission: RatingSubmission =
        serde_json::from_slice(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let ack = lock(&state).submit(&id, &submission)?;
    Ok(Json(ack).into_response())
}

async fn report(State(state): State<SharedService>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let csv = lock(&state).aggregate(&id)?.to_csv();
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("wav") => "audio/wav",
        Some("ogg") | Some("oga") => "audio/ogg",
        Some("mp3") => "audio/mpeg",
        Some("flac") => "audio/flac",
        _ => "application/octet-stream",
    }
}

async fn audio(State(state): State<SharedService>, Path(key): Path<String>) -> Result<Response, ApiError> {
    let path = lock(&state)
        .audio_path(&key)
        .map(std::path::Path::to_path_buf)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown audio key {key}")))?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, format!("audio {key}: {e}")))?;
    // The response must not reveal the file name, only the bytes.
    Ok(([(header::CONTENT_TYPE, content_type(&path)), (header::CACHE_CONTROL, "no-store")], bytes).into_response())
}

/// Builds the router. `ui_dir`, when given, is served for every path the
/// API does not claim.
pub fn router(state: SharedService, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/listeners", post(register))
        .route("/campaigns/{id}/next", get(next))
        .route("/campaigns/{id}/ratings", post(ratings))
        .route("/campaigns/{id}/report.csv", get(report))
        .route("/audio/{key}", get(audio))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: SharedService,
    ui_dir: Option<PathBuf>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state, ui_dir))
        .with_graceful_shutdown(shutdown)
        .await
}
