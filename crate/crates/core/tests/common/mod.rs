#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use compass_core::catalog::{embed_catalog, EmbedOptions};
use compass_core::provider::MockProvider;
use compass_core::{Catalog, CatalogFormat, Provider, Recommender, RecommenderConfig};

pub fn sample_catalog_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sample_catalog.jsonl")
}

pub async fn embed_with(mut catalog: Catalog, provider: &dyn Provider) -> Catalog {
    embed_catalog(&mut catalog, provider, EmbedOptions::default())
        .await
        .expect("mock embedding succeeds");
    catalog
}

/// A recommender over `catalog`, embedded by `provider`.
pub async fn recommender_for(catalog: Catalog, provider: Arc<MockProvider>) -> Recommender {
    let catalog = embed_with(catalog, provider.as_ref()).await;
    Recommender::new(Arc::new(catalog), provider, RecommenderConfig::default())
        .expect("catalog is fully embedded")
}

pub async fn sample_recommender(provider: Arc<MockProvider>) -> Recommender {
    let catalog = Catalog::load(sample_catalog_path(), CatalogFormat::Jsonl).unwrap();
    recommender_for(catalog, provider).await
}
