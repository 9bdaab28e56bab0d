use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("session `{0}` already has a run in progress")]
    Busy(String),
    #[error("session `{0}` has no pending clarification")]
    NothingToClarify(String),
    #[error("missing answers for: {}", .0.join(", "))]
    MissingAnswers(Vec<String>),
    #[error("malformed request body: {0}")]
    MalformedBody(String),
    #[error("session has no {0} yet")]
    NotReady(&'static str),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("storage error: {0}")]
    Storage(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownJob(_) | ServiceError::NotReady(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::Busy(_) | ServiceError::NothingToClarify(_) => StatusCode::CONFLICT,
            ServiceError::MissingAnswers(_) | ServiceError::MalformedBody(_) | ServiceError::InvalidConfig(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "UnknownSession",
            ServiceError::UnknownJob(_) => "UnknownJob",
            ServiceError::Busy(_) => "Busy",
            ServiceError::NothingToClarify(_) => "NothingToClarify",
            ServiceError::MissingAnswers(_) => "MissingAnswers",
            ServiceError::MalformedBody(_) => "MalformedBody",
            ServiceError::NotReady(_) => "NotReady",
            ServiceError::InvalidConfig(_) => "InvalidConfig",
            ServiceError::Storage(_) => "StorageError",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.kind(), "message": self.to_string()});
        if let ServiceError::MissingAnswers(missing) = &self {
            body["missing"] = json!(missing);
        }
        (self.status(), Json(body)).into_response()
    }
}
