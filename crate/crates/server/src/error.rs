use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use hcatd_core::{LevelError, ModelError, ProjectError, SessionError};
use serde_json::{json, Value};

/// Error body sent to clients: `{code, message, details, revision}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
    pub revision: Option<u64>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: json!({}),
            revision: None,
        }
    }

    pub fn details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn at(mut self, revision: u64) -> Self {
        self.revision.get_or_insert(revision);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "code": self.code,
            "message": self.message,
            "details": self.details,
            "revision": self.revision,
        });
        (self.status, Json(body)).into_response()
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let details = match &e {
            ModelError::Restriction { source_text, error } => json!({
                "source": source_text,
                "error": error.to_string(),
            }),
            _ => json!({}),
        };
        let code = match e {
            ModelError::Restriction { .. } => "parse_error",
            ModelError::SpaceTooLarge { .. } => "space_too_large",
            _ => "invalid_input",
        };
        ApiError::new(StatusCode::BAD_REQUEST, code, e.to_string()).details(details)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::Model(m) => m.into(),
            SessionError::Coverage(c) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "coverage_error", c.to_string())
            }
            SessionError::NotExecutable(s) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "not_executable", message)
                    .details(json!({ "scenario": s }))
            }
            SessionError::AlreadyRejected(s) => {
                ApiError::new(StatusCode::CONFLICT, "already_rejected", message)
                    .details(json!({ "scenario": s }))
            }
            SessionError::UnknownQuery(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_query", message)
                    .details(json!({ "query": id }))
            }
            SessionError::AlreadyAnswered(id) => {
                ApiError::new(StatusCode::CONFLICT, "already_answered", message)
                    .details(json!({ "query": id }))
            }
            SessionError::RestrictionConflict {
                restriction,
                conflicting,
            } => ApiError::new(StatusCode::CONFLICT, "restriction_conflict", message).details(
                json!({ "restriction": restriction, "conflicting": conflicting }),
            ),
            SessionError::ReplayMismatch(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "replay_mismatch", message)
            }
        }
    }
}

impl From<LevelError> for ApiError {
    fn from(e: LevelError) -> Self {
        let message = e.to_string();
        match e {
            LevelError::Model(m) => m.into(),
            LevelError::Session(s) => s.into(),
            LevelError::UnknownLevel(l) => ApiError::not_found(message).details(json!({ "level": l })),
            LevelError::UnknownSession(s) => {
                ApiError::not_found(message).details(json!({ "session": s }))
            }
            LevelError::UnknownAssumption(a) => {
                ApiError::not_found(message).details(json!({ "assumption": a }))
            }
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "level_error", message),
        }
    }
}

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "persist_failed", e.to_string())
    }
}
