//! HTTP facade over planning sessions.
//!
//! A session owns a scene and its plan history. Instructions run as
//! background jobs that clients poll; a run that needs details pauses until
//! the answers arrive through the clarify endpoint. Read endpoints always
//! see the last committed scene, never a run in progress.

mod error;
mod state;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

pub use error::ServiceError;
pub use state::{
    AppState, JobRecord, JobStatus, NewSession, ServiceConfig, SessionSnapshot, SessionSummary, DATA_DIR_ENV,
    SNAPSHOT_SCHEMA,
};

use scenesmith_core::planner::Answers;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instruction {
    pub text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clarification {
    pub answers: Answers,
}

type ApiResult<T> = Result<T, ServiceError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::MalformedBody(e.body_text()))
}

/// Already-canonical JSON text.
fn raw_json(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn list_sessions(State(state): State<AppState>) -> Json<Vec<SessionSummary>> {
    Json(state.list_sessions())
}

async fn create_session(State(state): State<AppState>, bytes: Bytes) -> ApiResult<(StatusCode, Json<SessionSummary>)> {
    let req: NewSession = if bytes.iter().all(u8::is_ascii_whitespace) {
        NewSession::default()
    } else {
        serde_json::from_slice(&bytes).map_err(|e| ServiceError::MalformedBody(e.to_string()))?
    };
    Ok((StatusCode::CREATED, Json(state.create_session(req)?)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionSummary>> {
    Ok(Json(state.summary(&id)?))
}

async fn instruct(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Instruction>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<JobRecord>)> {
    // Unknown sessions are 404 even when the body is also bad.
    state.summary(&id)?;
    let req = body(payload)?;
    if req.text.trim().is_empty() {
        return Err(ServiceError::MalformedBody("`text` is empty".into()));
    }
    Ok((StatusCode::ACCEPTED, Json(state.instruct(&id, req.text)?)))
}

async fn clarify(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Clarification>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<JobRecord>)> {
    state.summary(&id)?;
    let req = body(payload)?;
    Ok((StatusCode::ACCEPTED, Json(state.clarify(&id, req.answers)?)))
}

async fn pending_clarification(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.clarification(&id)?).into_response())
}

async fn scene(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(raw_json(state.scene_json(&id)?))
}

async fn plan(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(raw_json(state.plan_json(&id)?))
}

async fn plans(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.plans(&id)?).into_response())
}

async fn report(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(raw_json(state.report(&id)?.run.to_json()))
}

async fn trace(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(raw_json(state.report(&id)?.to_json()))
}

async fn job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JobRecord>> {
    Ok(Json(state.job(&id)?))
}

pub fn router(state: AppState) -> Router {
    let static_dir = state.config().static_dir.clone();
    let api = Router::new()
        .route("/health", get(health))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/instruct", post(instruct))
        .route("/sessions/{id}/clarify", post(clarify))
        .route("/sessions/{id}/clarification", get(pending_clarification))
        .route("/sessions/{id}/scene", get(scene))
        .route("/sessions/{id}/plan", get(plan))
        .route("/sessions/{id}/plans", get(plans))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/trace", get(trace))
        .route("/jobs/{id}", get(job))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "listening");
    axum::serve(listener, router(state)).await
}
