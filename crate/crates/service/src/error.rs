use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use phrasebank::Error;
use serde::Serialize;
use serde_json::Value;

/// Uniform error envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation_failed", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::NotFound { kind, id } => {
                Self::not_found(message).with_details(serde_json::json!({ "kind": kind, "id": id }))
            }
            Error::UnknownSource(tag) => {
                Self::not_found(message).with_details(serde_json::json!({ "sourceTag": tag }))
            }
            Error::AlreadyIngested { source_tag, name } => {
                Self::new(StatusCode::CONFLICT, "already_ingested", message)
                    .with_details(serde_json::json!({ "sourceTag": source_tag, "name": name }))
            }
            Error::UnsupportedMedia(_) => Self::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media", message),
            Error::DegenerateFit(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "degenerate_fit", message),
            Error::NonInvertibleTrend { slope } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "non_invertible_trend", message)
                    .with_details(serde_json::json!({ "slope": slope }))
            }
            Error::UnsupportedLanguagePair { supported, .. } => {
                Self::bad_request(message).with_details(serde_json::json!({ "supportedPairs": supported }))
            }
            Error::Validation(_) | Error::Domain(_) | Error::Config(_) => Self::bad_request(message),
            Error::Storage(_) | Error::Io(_) => {
                tracing::error!(error = %message, "request failed");
                Self::internal(message)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
