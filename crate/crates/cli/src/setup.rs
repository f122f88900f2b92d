//! Shared catalog and provider plumbing for the subcommands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use compass_core::catalog::{embed_catalog, EmbedOptions, EmbeddingCache};
use compass_core::provider::{MockProvider, OpenAiProvider};
use compass_core::{Catalog, CatalogFormat, Provider, ProviderConfig, Recommender, RecommenderConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderChoice {
    Mock,
    Live,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum, default_value = "mock")]
    pub provider: ProviderChoice,
    /// TOML or JSON provider settings (models, base URL, retries). The API key
    /// is read from the environment variable named by `api_key_env`.
    #[arg(long)]
    pub provider_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub mock_seed: u64,
    /// Mock only: sample the second stage instead of taking the top ten.
    #[arg(long)]
    pub stochastic: bool,
}

impl ProviderArgs {
    pub fn config(&self) -> Result<ProviderConfig> {
        Ok(match &self.provider_config {
            Some(path) => ProviderConfig::load(path)?,
            None => ProviderConfig::default(),
        })
    }

    pub fn is_live(&self) -> bool {
        self.provider == ProviderChoice::Live
    }
}

#[derive(Debug, Clone, Args)]
pub struct CatalogArgs {
    /// Catalog file (JSONL or CSV).
    #[arg(long)]
    pub catalog: PathBuf,
    /// JSONL embedding cache consulted before calling the provider.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

impl CatalogArgs {
    pub fn open_cache(&self) -> Result<Option<EmbeddingCache>> {
        self.cache
            .as_ref()
            .map(|p| EmbeddingCache::open(p).with_context(|| format!("opening cache {}", p.display())))
            .transpose()
    }
}

pub fn build_provider(args: &ProviderArgs) -> Result<Arc<dyn Provider>> {
    let config = args.config()?;
    Ok(match args.provider {
        ProviderChoice::Mock => {
            let mock = if args.stochastic {
                MockProvider::stochastic(args.mock_seed)
            } else {
                MockProvider::new(args.mock_seed)
            };
            Arc::new(mock.with_dimension(config.embedding_dimension))
        }
        ProviderChoice::Live => {
            Arc::new(OpenAiProvider::from_config(config).context("configuring the live provider")?)
        }
    })
}

pub fn load_catalog(path: &Path) -> Result<Catalog> {
    let format = CatalogFormat::from_path(path).unwrap_or(CatalogFormat::Jsonl);
    let catalog =
        Catalog::load(path, format).with_context(|| format!("loading catalog {}", path.display()))?;
    for warning in catalog.warnings() {
        tracing::warn!("{warning}");
    }
    Ok(catalog)
}

/// Loads the catalog and embeds any course that lacks an embedding.
pub async fn embedded_catalog(args: &CatalogArgs, provider: &dyn Provider) -> Result<Catalog> {
    let mut catalog = load_catalog(&args.catalog)?;
    if !catalog.is_fully_embedded() {
        let cache = args.open_cache()?;
        let report = embed_catalog(
            &mut catalog,
            provider,
            EmbedOptions {
                cache: cache.as_ref(),
                ..EmbedOptions::default()
            },
        )
        .await?;
        tracing::info!(?report, "embedded catalog");
    }
    Ok(catalog)
}

pub async fn build_recommender(catalog: &CatalogArgs, provider: &ProviderArgs) -> Result<Recommender> {
    let config = provider.config()?;
    let provider = build_provider(provider)?;
    let catalog = embedded_catalog(catalog, provider.as_ref()).await?;
    Ok(Recommender::new(
        Arc::new(catalog),
        provider,
        RecommenderConfig::from_provider_config(&config),
    )?)
}
