//! Chat-completion and embedding providers.
//!
//! [`Provider`] is the only surface the pipeline sees. Two implementations
//! ship: [`OpenAiProvider`], an OpenAI-compatible HTTP client, and
//! [`MockProvider`], a deterministic offline stand-in whose outputs are pure
//! functions of their inputs and a seed.

mod config;
mod mock;
mod openai;

use std::fmt;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingVector;

pub use config::ProviderConfig;
pub use mock::{MockBehavior, MockProvider, DEMOGRAPHIC_TERMS};
pub use openai::{HttpTransport, OpenAiProvider, Transport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl ProviderError {
    /// Whether retrying the same request may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            ProviderError::RateLimited { .. }
            | ProviderError::Timeout { .. }
            | ProviderError::Transport { .. } => true,
            ProviderError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }

    pub(crate) fn with_attempts(self, attempts: u32) -> Self {
        match self {
            ProviderError::RateLimited { .. } => ProviderError::RateLimited { attempts },
            ProviderError::Timeout { .. } => ProviderError::Timeout { attempts },
            ProviderError::Transport { message, .. } => ProviderError::Transport { message, attempts },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub model_id: String,
    /// Sampling seed forwarded to the provider; also salts stochastic mocks.
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            messages,
            temperature: 0.0,
            max_tokens: None,
            model_id: model_id.into(),
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidRequest("request has no messages".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {} must be finite and non-negative",
                self.temperature
            )));
        }
        if self.max_tokens == Some(0) {
            return Err(ProviderError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Mock,
    Live,
}

impl fmt::Display for ProviderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderMode::Mock => "mock",
            ProviderMode::Live => "live",
        })
    }
}

#[async_trait]
pub trait Provider: Send + Sync {
    /// Stable identifier used in cache keys.
    fn id(&self) -> &str;

    fn mode(&self) -> ProviderMode;

    fn embedding_model(&self) -> &str;

    /// Returns the assistant text of a chat completion.
    async fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError>;

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;
}
