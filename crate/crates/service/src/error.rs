use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use compass_core::recommender::{RecommendError, Stage};
use serde::Serialize;

/// An error response: status plus a JSON body
/// `{"error": code, "message": ..., "stage": ...}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub stage: Option<Stage>,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<Stage>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            stage: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn busy() -> Self {
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "busy",
            "too many recommendations in progress; retry shortly",
        )
    }

    pub fn timeout() -> Self {
        Self::new(
            StatusCode::GATEWAY_TIMEOUT,
            "timeout",
            "the recommendation took too long",
        )
    }
}

impl From<RecommendError> for ApiError {
    fn from(error: RecommendError) -> Self {
        let message = error.to_string();
        match error {
            RecommendError::InvalidQuery(_) => Self::bad_request(message),
            RecommendError::EmptyCorpus { filter } => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "empty_corpus",
                format!(
                    "no courses in the catalog match the level filter {filter}; choose a broader level range"
                ),
            ),
            RecommendError::Provider { stage, .. } => Self {
                stage: Some(stage),
                ..Self::new(StatusCode::BAD_GATEWAY, "provider_failure", message)
            },
            RecommendError::ParseFailure { .. } => Self {
                stage: Some(Stage::Recommendation),
                ..Self::new(StatusCode::BAD_GATEWAY, "unparseable_output", message)
            },
            RecommendError::Index(_) => Self {
                stage: Some(Stage::Retrieval),
                ..Self::new(StatusCode::BAD_GATEWAY, "retrieval_failure", message)
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: self.code,
            message: &self.message,
            stage: self.stage,
        };
        (self.status, Json(body)).into_response()
    }
}
