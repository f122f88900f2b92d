use std::path::{Path, PathBuf};
use std::time::Duration;

use compass_core::ProviderConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Mock,
    Live,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(Self::Mock),
            "live" => Ok(Self::Live),
            other => Err(format!("unknown provider {other:?} (expected mock or live)")),
        }
    }
}

/// Service settings, read from TOML and then overridden by `COMPASS_*`
/// environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind_address: String,
    pub catalog_path: PathBuf,
    pub provider: ProviderKind,
    pub mock_seed: u64,
    pub provider_config: ProviderConfig,
    /// JSONL embedding cache used when the catalog has unembedded courses.
    pub embedding_cache: Option<PathBuf>,
    pub request_timeout_secs: f64,
    pub max_concurrent_recommendations: usize,
    /// Origins allowed by CORS; empty disables cross-origin access.
    pub cors_origins: Vec<String>,
    /// Static UI assets served at `/`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind_address: "127.0.0.1:8080".into(),
            catalog_path: PathBuf::from("catalog.jsonl"),
            provider: ProviderKind::Mock,
            mock_seed: 0,
            provider_config: ProviderConfig::default(),
            embedding_cache: None,
            request_timeout_secs: 120.0,
            max_concurrent_recommendations: 8,
            cors_origins: Vec::new(),
            ui_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Applies overrides from the process environment.
    pub fn apply_env(self) -> Result<Self, ConfigError> {
        self.apply_env_from(|name| std::env::var(name).ok())
    }

    /// Applies overrides from `lookup`, which maps variable names to values.
    pub fn apply_env_from(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        fn parse<T: std::str::FromStr>(name: &'static str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.trim().parse().map_err(|e: T::Err| ConfigError::Env {
                name,
                message: e.to_string(),
            })
        }

        if let Some(v) = lookup("COMPASS_BIND_ADDRESS") {
            self.bind_address = v;
        }
        if let Some(v) = lookup("COMPASS_CATALOG_PATH") {
            self.catalog_path = PathBuf::from(v);
        }
        if let Some(v) = lookup("COMPASS_PROVIDER") {
            self.provider = parse("COMPASS_PROVIDER", &v)?;
        }
        if let Some(v) = lookup("COMPASS_MOCK_SEED") {
            self.mock_seed = parse("COMPASS_MOCK_SEED", &v)?;
        }
        if let Some(v) = lookup("COMPASS_EMBEDDING_CACHE") {
            self.embedding_cache = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup("COMPASS_REQUEST_TIMEOUT_SECS") {
            self.request_timeout_secs = parse("COMPASS_REQUEST_TIMEOUT_SECS", &v)?;
        }
        if let Some(v) = lookup("COMPASS_MAX_CONCURRENT_RECOMMENDATIONS") {
            self.max_concurrent_recommendations = parse("COMPASS_MAX_CONCURRENT_RECOMMENDATIONS", &v)?;
        }
        if let Some(v) = lookup("COMPASS_CORS_ORIGINS") {
            self.cors_origins = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
        }
        if let Some(v) = lookup("COMPASS_UI_DIR") {
            self.ui_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup("COMPASS_BASE_URL") {
            self.provider_config.base_url = v;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_concurrent_recommendations == 0 {
            return Err(ConfigError::Invalid(
                "max_concurrent_recommendations must be at least 1".into(),
            ));
        }
        if !(self.request_timeout_secs.is_finite() && self.request_timeout_secs > 0.0) {
            return Err(ConfigError::Invalid(
                "request_timeout_secs must be positive".into(),
            ));
        }
        if self.provider == ProviderKind::Live {
            self.provider_config
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_secs)
    }
}
