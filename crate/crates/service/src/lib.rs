//! HTTP front end for the course recommender.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/api/recommend` | `{query, levels?, k?}` → recommendations, context, timing |
//! | GET | `/api/courses/{course_id}` | course record without its embedding |
//! | GET | `/api/health` | catalog size, dimension, provider mode |
//!
//! Every response carries an `x-request-id` header (echoed from the request
//! when present). Recommendations are bounded by a concurrency cap (503 when
//! full) and a per-request timeout (504).

pub mod config;
pub mod error;
pub mod routes;

use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::Context;
use axum::extract::Request;
use axum::http::{HeaderName, HeaderValue, Method};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use compass_core::catalog::{embed_catalog, EmbedOptions, EmbeddingCache};
use compass_core::provider::{MockProvider, OpenAiProvider};
use compass_core::{Catalog, CatalogFormat, Provider, Recommender, RecommenderConfig};
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::{ServeDir, ServeFile};

pub use config::{ConfigError, ProviderKind, ServiceConfig};
pub use error::ApiError;

pub const REQUEST_ID_HEADER: &str = "x-request-id";

#[derive(Clone)]
pub struct AppState {
    pub recommender: Arc<Recommender>,
    pub limiter: Arc<Semaphore>,
    pub request_timeout: Duration,
}

impl AppState {
    pub fn new(recommender: Arc<Recommender>, max_concurrent: usize, request_timeout: Duration) -> Self {
        assert!(max_concurrent >= 1, "max_concurrent must be at least 1");
        Self {
            recommender,
            limiter: Arc::new(Semaphore::new(max_concurrent)),
            request_timeout,
        }
    }
}

/// Request identifier stored in request extensions.
#[derive(Debug, Clone)]
pub struct RequestId(pub String);

async fn request_context(mut request: Request, next: Next) -> Response {
    let id = request
        .headers()
        .get(REQUEST_ID_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|v| !v.is_empty() && v.len() <= 128)
        .map(String::from)
        .unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    request.extensions_mut().insert(RequestId(id.clone()));

    let started = Instant::now();
    let mut response = next.run(request).await;
    tracing::info!(
        request_id = %id,
        %method,
        %path,
        status = response.status().as_u16(),
        latency_ms = started.elapsed().as_secs_f64() * 1e3,
        "request"
    );
    if let Ok(value) = HeaderValue::from_str(&id) {
        response
            .headers_mut()
            .insert(HeaderName::from_static(REQUEST_ID_HEADER), value);
    }
    response
}

/// API routes without CORS or static files.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/recommend", post(routes::recommend))
        .route("/api/courses/{course_id}", get(routes::course))
        .route("/api/health", get(routes::health))
        .with_state(state)
        .layer(middleware::from_fn(request_context))
}

/// The full application: API routes, CORS for configured origins, and the UI
/// bundle when `ui_dir` is set.
pub fn app(state: AppState, config: &ServiceConfig) -> anyhow::Result<Router> {
    let mut app = router(state);
    if let Some(dir) = &config.ui_dir {
        let index = dir.join("index.html");
        app = app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)));
    }
    if !config.cors_origins.is_empty() {
        let origins = config
            .cors_origins
            .iter()
            .map(|o| HeaderValue::from_str(o).with_context(|| format!("invalid CORS origin {o:?}")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([axum::http::header::CONTENT_TYPE])
                .expose_headers([HeaderName::from_static(REQUEST_ID_HEADER)]),
        );
    }
    Ok(app)
}

pub fn build_provider(config: &ServiceConfig) -> anyhow::Result<Arc<dyn Provider>> {
    Ok(match config.provider {
        ProviderKind::Mock => Arc::new(
            MockProvider::new(config.mock_seed).with_dimension(config.provider_config.embedding_dimension),
        ),
        ProviderKind::Live => Arc::new(
            OpenAiProvider::from_config(config.provider_config.clone())
                .context("configuring the live provider")?,
        ),
    })
}

/// Loads the catalog, embeds any courses still lacking embeddings, and
/// builds the recommender.
pub async fn build_state(config: &ServiceConfig) -> anyhow::Result<AppState> {
    config.validate()?;
    let format = CatalogFormat::from_path(&config.catalog_path).unwrap_or(CatalogFormat::Jsonl);
    let mut catalog = Catalog::load(&config.catalog_path, format)
        .with_context(|| format!("loading catalog {}", config.catalog_path.display()))?;
    let provider = build_provider(config)?;
    if !catalog.is_fully_embedded() {
        let cache = config
            .embedding_cache
            .as_ref()
            .map(EmbeddingCache::open)
            .transpose()?;
        let report = embed_catalog(
            &mut catalog,
            provider.as_ref(),
            EmbedOptions {
                cache: cache.as_ref(),
                ..EmbedOptions::default()
            },
        )
        .await?;
        tracing::info!(?report, "embedded catalog at startup");
    }
    let recommender = Recommender::new(
        Arc::new(catalog),
        provider,
        RecommenderConfig::from_provider_config(&config.provider_config),
    )?;
    tracing::info!(
        courses = recommender.catalog().len(),
        dimension = recommender.index().dimension(),
        mode = %recommender.provider().mode(),
        "recommender ready"
    );
    Ok(AppState::new(
        Arc::new(recommender),
        config.max_concurrent_recommendations,
        config.request_timeout(),
    ))
}

/// Serves until Ctrl-C.
pub async fn run(config: ServiceConfig) -> anyhow::Result<()> {
    let state = build_state(&config).await?;
    let app = app(state, &config)?;
    let listener = tokio::net::TcpListener::bind(&config.bind_address)
        .await
        .with_context(|| format!("binding {}", config.bind_address))?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await?;
    Ok(())
}
