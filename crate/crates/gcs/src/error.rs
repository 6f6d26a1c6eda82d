use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

use crate::protocol::{ErrorBody, ErrorResponse, VERSION};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    Core(#[from] gmob_core::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unsupported media type: {0}")]
    Unsupported(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ServiceError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn status(&self) -> StatusCode {
        use gmob_core::Error as E;
        match self {
            ServiceError::Core(E::Pgm(_)) => StatusCode::BAD_REQUEST,
            ServiceError::Core(E::Io(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            ServiceError::Core(_) | ServiceError::Invalid { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Unsupported(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn body(&self) -> ErrorResponse {
        use gmob_core::Error as E;
        let (code, field) = match self {
            ServiceError::Core(E::InvalidArgument { field, .. }) => ("invalid_config", Some(field.clone())),
            ServiceError::Core(E::Config(_)) => ("invalid_config", None),
            ServiceError::Core(E::Pgm(_)) => ("bad_image", None),
            ServiceError::Core(E::Io(_)) => ("internal", None),
            ServiceError::Core(_) => ("invalid_request", None),
            ServiceError::Invalid { field, .. } => ("invalid_request", Some(field.clone())),
            ServiceError::BadRequest(_) => ("bad_request", None),
            ServiceError::Unsupported(_) => ("unsupported_media_type", None),
            ServiceError::NotFound(_) => ("not_found", None),
            ServiceError::Conflict(_) => ("conflict", None),
            ServiceError::Internal(_) => ("internal", None),
        };
        ErrorResponse {
            v: VERSION,
            error: ErrorBody {
                code: code.into(),
                message: self.to_string(),
                field,
            },
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
