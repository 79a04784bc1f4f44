use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use facihub_core::engine::JobStatus;
use facihub_core::presence::PresenceError;
use facihub_core::review::{FieldError, ReviewError, ReviewRecord};
use facihub_core::stats::StatsError;
use facihub_core::EngineError;
use serde::Serialize;

/// Structured error shared by the HTTP layer and the command line. The CLI
/// prints it as one JSON line; the API returns it as the response body.
#[derive(Debug, Serialize)]
pub struct AppError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
    /// The decision that won a first-decision-wins conflict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub existing: Option<Box<ReviewRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub job: Option<JobStatus>,
}

impl AppError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), fields: Vec::new(), existing: None, job: None }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn validation(fields: Vec<FieldError>) -> Self {
        let message = fields.iter().map(|f| format!("{}: {}", f.field, f.message)).collect::<Vec<_>>().join("; ");
        Self { fields, ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message) }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn busy(job: JobStatus) -> Self {
        let message = format!("a {} job is already running", job.kind);
        Self { job: Some(job), ..Self::new(StatusCode::CONFLICT, "busy", message) }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    /// Single-line JSON rendering for the command line.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"code\":\"{}\"}}", self.code))
    }
}

impl From<EngineError> for AppError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::Review(ReviewError::Validation(fields)) => AppError::validation(fields),
            EngineError::Review(ReviewError::Conflict(existing)) => {
                Self { existing: Some(existing), ..Self::new(StatusCode::CONFLICT, "conflict", message) }
            }
            EngineError::Review(ReviewError::NotFound(_)) => AppError::not_found(message),
            EngineError::Review(_) => Self::new(StatusCode::CONFLICT, "invalid_state", message),
            EngineError::Forum(facihub_core::forum::ForumError::NotFound(_)) => AppError::not_found(message),
            EngineError::Forum(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "forum", message),
            EngineError::Stats(StatsError::Argument(_)) | EngineError::Argument(_) => AppError::bad_request(message),
            EngineError::Stats(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "analysis", message),
            EngineError::Presence(PresenceError::Io(_)) => AppError::internal(message),
            EngineError::Presence(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "coding", message),
            EngineError::Targeting(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "targeting", message),
            EngineError::Agent(_) => Self::new(StatusCode::BAD_GATEWAY, "generation", message),
            EngineError::Config(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "config", message),
            EngineError::Storage(_) | EngineError::Corrupt(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", message)
            }
        }
    }
}

impl From<StatsError> for AppError {
    fn from(e: StatsError) -> Self {
        EngineError::Stats(e).into()
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
