use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use super::{ChatRequest, Provider, ProviderConfig, ProviderError, ProviderMode};
use crate::embedding::EmbeddingVector;

/// Posts a JSON body to an endpoint path (e.g. `/chat/completions`) and
/// returns the decoded JSON response.
#[async_trait]
pub trait Transport: Send + Sync {
    async fn post_json(&self, path: &str, body: &Value) -> Result<Value, ProviderError>;
}

/// HTTPS transport with bearer-token auth.
pub struct HttpTransport {
    client: reqwest::Client,
    base_url: String,
    api_key: String,
}

impl HttpTransport {
    pub fn new(config: &ProviderConfig) -> Result<Self, ProviderError> {
        Self::with_api_key(config, config.api_key()?)
    }

    /// Uses `api_key` directly instead of reading it from the environment.
    pub fn with_api_key(config: &ProviderConfig, api_key: impl Into<String>) -> Result<Self, ProviderError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            client,
            base_url: config.base_url.trim_end_matches('/').to_string(),
            api_key: api_key.into(),
        })
    }
}

#[async_trait]
impl Transport for HttpTransport {
    async fn post_json(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let url = format!("{}{}", self.base_url, path);
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .await
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout { attempts: 1 }
                } else {
                    ProviderError::Transport {
                        message: e.to_string(),
                        attempts: 1,
                    }
                }
            })?;
        let status = response.status();
        let text = response.text().await.map_err(|e| ProviderError::Transport {
            message: e.to_string(),
            attempts: 1,
        })?;
        match status.as_u16() {
            200..=299 => {
                serde_json::from_str(&text).map_err(|e| ProviderError::MalformedResponse(e.to_string()))
            }
            401 | 403 => Err(ProviderError::Auth(text)),
            429 => Err(ProviderError::RateLimited { attempts: 1 }),
            code => Err(ProviderError::Http {
                status: code,
                body: text,
            }),
        }
    }
}

/// Client for OpenAI-compatible `/chat/completions` and `/embeddings`.
///
/// Transient failures (timeouts, 429, 5xx, connection errors) are retried
/// with exponential backoff up to `max_retries` extra attempts. At most
/// `max_in_flight` requests are outstanding at once.
pub struct OpenAiProvider<T = HttpTransport> {
    transport: T,
    config: ProviderConfig,
    in_flight: Semaphore,
    attempts: AtomicU64,
    id: String,
}

impl OpenAiProvider<HttpTransport> {
    pub fn from_config(config: ProviderConfig) -> Result<Self, ProviderError> {
        config.validate()?;
        let transport = HttpTransport::new(&config)?;
        Ok(Self::with_transport(config, transport))
    }
}

impl<T: Transport> OpenAiProvider<T> {
    pub fn with_transport(config: ProviderConfig, transport: T) -> Self {
        let id = format!("openai-compatible:{}", config.base_url.trim_end_matches('/'));
        Self {
            transport,
            in_flight: Semaphore::new(config.max_in_flight.max(1)),
            config,
            attempts: AtomicU64::new(0),
            id,
        }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Total transport attempts made, retries included.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    async fn post_with_retries(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let mut attempt: u32 = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self
                    .in_flight
                    .acquire()
                    .await
                    .map_err(|e| ProviderError::Config(e.to_string()))?;
                self.attempts.fetch_add(1, Ordering::Relaxed);
                self.transport.post_json(path, body).await
            };
            match result {
                Ok(value) => return Ok(value),
                Err(e) if e.is_transient() && attempt <= self.config.max_retries => {
                    let delay = self
                        .config
                        .retry_base_delay_ms
                        .saturating_mul(1u64 << (attempt - 1).min(16));
                    tracing::debug!(path, attempt, error = %e, delay_ms = delay, "retrying");
                    tokio::time::sleep(Duration::from_millis(delay)).await;
                }
                Err(e) => return Err(e.with_attempts(attempt)),
            }
        }
    }
}

fn chat_body(request: &ChatRequest) -> Value {
    let mut body = json!({
        "model": request.model_id,
        "messages": request.messages,
        "temperature": request.temperature,
    });
    if let Some(max_tokens) = request.max_tokens {
        body["max_tokens"] = json!(max_tokens);
    }
    if let Some(seed) = request.seed {
        body["seed"] = json!(seed);
    }
    body
}

fn chat_content(response: &Value) -> Result<String, ProviderError> {
    response
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::MalformedResponse("missing choices[0].message.content".into()))
}

fn embedding_values(response: &Value) -> Result<EmbeddingVector, ProviderError> {
    let values = response
        .pointer("/data/0/embedding")
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::MalformedResponse("missing data[0].embedding".into()))?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| ProviderError::MalformedResponse("non-numeric embedding component".into()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    EmbeddingVector::new(values).map_err(|e| ProviderError::MalformedResponse(e.to_string()))
}

#[async_trait]
impl<T: Transport> Provider for OpenAiProvider<T> {
    fn id(&self) -> &str {
        &self.id
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Live
    }

    fn embedding_model(&self) -> &str {
        &self.config.embedding_model
    }

    async fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        request.validate()?;
        let response = self
            .post_with_retries("/chat/completions", &chat_body(request))
            .await?;
        chat_content(&response)
    }

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let body = json!({ "model": self.config.embedding_model, "input": text });
        let response = self.post_with_retries("/embeddings", &body).await?;
        embedding_values(&response)
    }
}
