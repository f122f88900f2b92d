use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ProviderError;
use crate::embedding::DEFAULT_DIMENSION;

/// Settings for an OpenAI-compatible endpoint.
///
/// The API key itself is never stored here; `api_key_env` names the
/// environment variable that holds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub base_url: String,
    pub api_key_env: String,
    /// Model that writes the idealized course description.
    pub generation_model: String,
    /// Model that selects and explains the final recommendations.
    pub reasoning_model: String,
    pub embedding_model: String,
    pub embedding_dimension: usize,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub retry_base_delay_ms: u64,
    /// Cap on concurrent requests issued through one client.
    pub max_in_flight: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            generation_model: "gpt-3.5-turbo".into(),
            reasoning_model: "gpt-4o".into(),
            embedding_model: "text-embedding-ada-002".into(),
            embedding_dimension: DEFAULT_DIMENSION,
            timeout_secs: 60.0,
            max_retries: 3,
            retry_base_delay_ms: 500,
            max_in_flight: 4,
        }
    }
}

impl ProviderConfig {
    /// Reads a TOML or JSON config file (chosen by extension, TOML otherwise).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        let config: ProviderConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ProviderError::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| ProviderError::Config(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ProviderError::Config("timeout_secs must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(ProviderError::Config("max_in_flight must be at least 1".into()));
        }
        if self.embedding_dimension == 0 {
            return Err(ProviderError::Config(
                "embedding_dimension must be positive".into(),
            ));
        }
        if self.base_url.trim().is_empty() {
            return Err(ProviderError::Config("base_url is empty".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Reads the API key from the configured environment variable.
    pub fn api_key(&self) -> Result<String, ProviderError> {
        std::env::var(&self.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                ProviderError::Auth(format!("environment variable {} is not set", self.api_key_env))
            })
    }
}
