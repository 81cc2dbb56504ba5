use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ddbforge_core::diag::Diagnostic;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("malformed request body: {0}")]
    BadRequest(String),
    #[error("no project {0}")]
    UnknownProject(String),
    #[error("table {0} is not in the project's schema")]
    UnknownTable(String),
    #[error("version {sent} is stale; the project is at version {current}")]
    StaleVersion { sent: u64, current: u64 },
    #[error("{0}")]
    Conflict(String),
    #[error("{message}")]
    Unprocessable { message: String, diagnostics: Vec<Diagnostic> },
    #[error("storage: {0}")]
    Storage(String),
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "<[Diagnostic]>::is_empty")]
    diagnostics: &'a [Diagnostic],
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::UnknownProject(_) | ApiError::UnknownTable(_) => StatusCode::NOT_FOUND,
            ApiError::StaleVersion { .. } | ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "bad-request",
            ApiError::UnknownProject(_) => "unknown-project",
            ApiError::UnknownTable(_) => "unknown-table",
            ApiError::StaleVersion { .. } => "stale-version",
            ApiError::Conflict(_) => "conflict",
            ApiError::Unprocessable { .. } => "unprocessable",
            ApiError::Storage(_) => "storage",
        }
    }
}

impl From<ddbforge_core::pipeline::InputError> for ApiError {
    fn from(e: ddbforge_core::pipeline::InputError) -> Self {
        ApiError::Unprocessable { message: e.to_string(), diagnostics: e.diagnostics() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let diagnostics = match &self {
            ApiError::Unprocessable { diagnostics, .. } => diagnostics.as_slice(),
            _ => &[],
        };
        let body = Body { error: self.code(), message: self.to_string(), diagnostics };
        (self.status(), Json(body)).into_response()
    }
}
