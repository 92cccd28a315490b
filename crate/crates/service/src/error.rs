use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gatekeeper_core::Error;
use serde_json::json;

/// Error body: `{"error": code, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found() -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
    }

    /// The single response for every recovery failure, whatever the cause.
    pub fn recovery_failed() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "recovery_failed",
            "password recovery failed",
        )
    }
}

pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::InvalidId(_)
        | Error::WeakPassword
        | Error::InvalidRole(_)
        | Error::InvalidStatus(_)
        | Error::InvalidResource(_)
        | Error::OldPasswordMismatch
        | Error::AdminLevelNotGrantable
        | Error::GuestWriteForbidden
        | Error::Parse(_) => StatusCode::BAD_REQUEST,
        Error::AuthFailed
        | Error::InvalidToken
        | Error::RecoveryUnavailable
        | Error::HintMismatch
        | Error::RecoveryLocked => StatusCode::UNAUTHORIZED,
        Error::NotAuthorized | Error::PolicyForbidden | Error::SelfRegistrationDisabled => {
            StatusCode::FORBIDDEN
        }
        Error::UnknownUser(_) | Error::UnknownResource(_) | Error::UnknownGrant(_) => {
            StatusCode::NOT_FOUND
        }
        Error::IdAlreadyExists
        | Error::AdminCapExceeded
        | Error::SelfDemotionForbidden
        | Error::SelfDisableForbidden
        | Error::ResourceExists(_)
        | Error::StoreExists(_) => StatusCode::CONFLICT,
        Error::Io(_)
        | Error::ParseFailure { .. }
        | Error::Validation(_)
        | Error::UnsupportedVersion(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = status_for(&err);
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!(error = %err, "request failed");
            return Self::new(status, "internal", "internal error");
        }
        Self::new(status, err.code(), err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": self.code, "message": self.message })),
        )
            .into_response()
    }
}
