//! Course recommendation through two-stage retrieval.
//!
//! A student's free-text query is first rewritten by a language model into an
//! idealized catalog-style course description. That description is embedded
//! and compared against every course in the catalog; the most similar courses
//! form the context from which a second model call picks ten grounded
//! recommendations, each with a rationale and a confidence level.
//!
//! Modules:
//! - [`catalog`]: course records, CSV/JSONL ingestion, embedding, level filters.
//! - [`index`]: exact cosine-similarity search with bounded top-k selection.
//! - [`provider`]: chat/embedding clients (OpenAI-compatible HTTP and an offline mock).
//! - [`recommender`]: the pipeline itself and the markdown output parser.
//! - [`experiments`]: subject networks, rank likelihood, paired-query bias, latency.
//! - [`synthetic`]: seeded synthetic catalogs for tests and benchmarks.

pub mod catalog;
pub mod embedding;
pub mod experiments;
pub mod index;
pub mod provider;
pub mod recommender;
pub mod synthetic;

mod digest;

pub use catalog::{Catalog, CatalogError, CatalogFormat, CourseRecord, LevelFilter};
pub use embedding::{EmbeddingVector, VectorError, DEFAULT_DIMENSION};
pub use index::{build_index, cosine_similarity, IndexError, ScoredCourse, SimilarityIndex};
pub use provider::{ChatMessage, ChatRequest, Provider, ProviderConfig, ProviderError, Role};
pub use recommender::{
    ContextBundle, IdealDescription, Recommendation, RecommendationResponse, Recommender, RecommenderConfig,
    StudentQuery,
};
