use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use thiserror::Error;
use ur_core::escalation::EscalationError;
use ur_core::governor::GovernError;
use ur_core::registry::RegistryError;
use ur_sim::SimError;

use crate::canonical_response;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("missing or unknown bearer token")]
    Unauthorized,
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown record {0}")]
    UnknownTarget(String),
    #[error("unknown escalation task {0}")]
    UnknownTask(String),
    #[error("unknown cursor {since}; the log ends at {last}")]
    UnknownCursor { since: u64, last: u64 },
    #[error("{0}")]
    WrongState(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    ValidationError(String),
    #[error("registry is not running")]
    Unavailable,
    #[error("{0}")]
    Internal(String),
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: String,
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Unauthorized => "unauthorized",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::UnknownTarget(_) => "unknown_target",
            ApiError::UnknownTask(_) => "unknown_task",
            ApiError::UnknownCursor { .. } => "unknown_cursor",
            ApiError::WrongState(_) => "wrong_state",
            ApiError::Forbidden(_) => "forbidden",
            ApiError::ValidationError(_) => "validation_error",
            ApiError::Unavailable => "unavailable",
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::UnknownTarget(_) | ApiError::UnknownTask(_) | ApiError::UnknownCursor { .. } => {
                StatusCode::NOT_FOUND
            }
            ApiError::WrongState(_) => StatusCode::CONFLICT,
            ApiError::Forbidden(_) => StatusCode::FORBIDDEN,
            ApiError::ValidationError(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if matches!(self, ApiError::Internal(_)) {
            tracing::warn!("internal error: {self}");
        }
        let body = Body {
            error: self.code(),
            message: self.to_string(),
        };
        canonical_response(self.status(), &body)
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::UnknownTarget(id) => ApiError::UnknownTarget(id.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<EscalationError> for ApiError {
    fn from(e: EscalationError) -> Self {
        match e {
            EscalationError::UnknownTask(t) => ApiError::UnknownTask(t.0.to_string()),
            EscalationError::WrongState(m) => ApiError::WrongState(m),
            EscalationError::Forbidden(m) => ApiError::Forbidden(m),
            EscalationError::ValidationError(m) => ApiError::ValidationError(m),
            EscalationError::Govern(GovernError::Registry(r)) => r.into(),
            EscalationError::Govern(other) => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Escalation(e) => e.into(),
            SimError::Registry(e) => e.into(),
            other => ApiError::Internal(other.to_string()),
        }
    }
}
