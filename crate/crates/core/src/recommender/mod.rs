//! The two-stage recommendation pipeline.
//!
//! 1. A generation model rewrites the student's query as an idealized course
//!    description.
//! 2. That description is embedded and the `k` most similar catalog courses
//!    (default 50) are retrieved, honoring the level filter.
//! 3. A reasoning model receives the retrieved courses as context and picks
//!    up to ten, each with a rationale and a confidence level.
//! 4. The markdown answer is parsed and grounded against the context; one
//!    reprompt is attempted if nothing can be recovered.

pub mod parse;
pub mod prompts;

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, LevelFilter};
use crate::digest::sha256_hex;
use crate::index::{build_index, IndexError, ScoredCourse, SimilarityIndex};
use crate::provider::{ChatMessage, ChatRequest, Provider, ProviderConfig, ProviderError};

pub use parse::{parse_recommendations, ParseFailure, ParsedRecommendations};
pub use prompts::TemplateDigests;

use prompts::{sanitize, FORMAT_REMINDER, IDEAL_DESCRIPTION, RECOMMENDATION};

pub const MAX_RECOMMENDATIONS: usize = 10;
pub const DEFAULT_CONTEXT_SIZE: usize = 50;
pub const MAX_QUERY_CHARS: usize = 4000;

/// Pipeline step, used to tag errors and to record execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    IdealDescription,
    Embedding,
    Retrieval,
    Recommendation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::IdealDescription => "ideal_description",
            Stage::Embedding => "embedding",
            Stage::Retrieval => "retrieval",
            Stage::Recommendation => "recommendation",
        })
    }
}

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("{stage} stage failed: {source}")]
    Provider {
        stage: Stage,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("no courses match level filter {filter}")]
    EmptyCorpus { filter: LevelFilter },
    #[error("could not parse recommendations: {reason}")]
    ParseFailure {
        reason: ParseFailure,
        raw_output: String,
    },
}

/// A validated student request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentQuery {
    pub text: String,
    pub level_filter: LevelFilter,
}

impl StudentQuery {
    pub fn new(text: impl Into<String>, level_filter: LevelFilter) -> Result<Self, RecommendError> {
        let text = text.into();
        let chars = text.chars().count();
        if text.trim().is_empty() {
            return Err(RecommendError::InvalidQuery("query text is empty".into()));
        }
        if chars > MAX_QUERY_CHARS {
            return Err(RecommendError::InvalidQuery(format!(
                "query has {chars} characters (maximum {MAX_QUERY_CHARS})"
            )));
        }
        Ok(Self { text, level_filter })
    }

    pub fn digest(&self) -> String {
        sha256_hex(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdealDescription {
    pub text: String,
    pub source_query_digest: String,
}

/// The retrieved courses and the prompt text built from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub ideal: IdealDescription,
    pub courses: Vec<ScoredCourse>,
    pub context_text: String,
}

impl ContextBundle {
    pub fn contains(&self, course_id: &str) -> bool {
        self.courses.iter().any(|c| c.course_id == course_id)
    }

    /// Context rank of `course_id`, if it was retrieved.
    pub fn rank_of(&self, course_id: &str) -> Option<usize> {
        self.courses
            .iter()
            .find(|c| c.course_id == course_id)
            .map(|c| c.rank)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Confidence {
    High,
    Medium,
    Low,
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Confidence::High => "High",
            Confidence::Medium => "Medium",
            Confidence::Low => "Low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub course_id: String,
    pub rationale: String,
    pub confidence: Confidence,
}

pub(crate) mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Duration::try_from_secs_f64(ms / 1000.0).map_err(serde::de::Error::custom)
    }
}

/// Wall-clock time spent in the pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    /// Ideal description + embedding + similarity search.
    #[serde(rename = "retrieval_ms", with = "duration_ms")]
    pub retrieval: Duration,
    /// Similarity search alone.
    #[serde(rename = "search_ms", with = "duration_ms")]
    pub search: Duration,
    /// Whole request, recommendation stage included.
    #[serde(rename = "total_ms", with = "duration_ms")]
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationResponse {
    pub recommendations: Vec<Recommendation>,
    pub context: ContextBundle,
    pub raw_output: String,
    pub warnings: Vec<String>,
    /// Stages in the order they ran.
    pub stages: Vec<Stage>,
    pub template_digests: TemplateDigests,
    pub reprompted: bool,
    pub timing: Timing,
}

impl RecommendationResponse {
    /// Whether every recommended course is part of the retrieved context.
    pub fn is_grounded(&self) -> bool {
        self.recommendations
            .iter()
            .all(|r| self.context.contains(&r.course_id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommenderConfig {
    /// Number of courses retrieved into the context.
    pub k: usize,
    pub generation_model: String,
    pub reasoning_model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        Self::from_provider_config(&ProviderConfig::default())
    }
}

impl RecommenderConfig {
    pub fn from_provider_config(config: &ProviderConfig) -> Self {
        Self {
            k: DEFAULT_CONTEXT_SIZE,
            generation_model: config.generation_model.clone(),
            reasoning_model: config.reasoning_model.clone(),
            temperature: 0.0,
            max_tokens: None,
        }
    }
}

/// Per-call options.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecommendOptions {
    /// Overrides the configured context size.
    pub k: Option<usize>,
    /// Sampling seed passed to both chat requests.
    pub seed: Option<u64>,
}

/// Formats retrieved courses as `<id>: <title>\n<description>\n\n` blocks in
/// rank order. Whitespace inside titles and descriptions is collapsed so each
/// course occupies exactly three lines.
pub fn format_context(courses: &[ScoredCourse], catalog: &Catalog) -> String {
    let mut out = String::new();
    for scored in courses {
        let (title, description) = catalog
            .get(&scored.course_id)
            .map(|c| (c.title.as_str(), c.description.as_str()))
            .unwrap_or_default();
        out.push_str(&scored.course_id);
        out.push_str(": ");
        out.push_str(&title.split_whitespace().collect::<Vec<_>>().join(" "));
        out.push('\n');
        out.push_str(&description.split_whitespace().collect::<Vec<_>>().join(" "));
        out.push_str("\n\n");
    }
    out
}

/// Immutable pipeline over a shared catalog, index, and provider. Calls are
/// independent and may run concurrently.
pub struct Recommender {
    catalog: Arc<Catalog>,
    index: Arc<SimilarityIndex>,
    provider: Arc<dyn Provider>,
    config: RecommenderConfig,
}

impl fmt::Debug for Recommender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Recommender")
            .field("courses", &self.catalog.len())
            .field("provider", &self.provider.id())
            .field("config", &self.config)
            .finish()
    }
}

impl Recommender {
    /// Builds the similarity index from `catalog`, which must be fully embedded.
    pub fn new(
        catalog: Arc<Catalog>,
        provider: Arc<dyn Provider>,
        config: RecommenderConfig,
    ) -> Result<Self, IndexError> {
        let index = Arc::new(build_index(&catalog)?);
        Ok(Self::with_index(catalog, index, provider, config))
    }

    pub fn with_index(
        catalog: Arc<Catalog>,
        index: Arc<SimilarityIndex>,
        provider: Arc<dyn Provider>,
        config: RecommenderConfig,
    ) -> Self {
        Self {
            catalog,
            index,
            provider,
            config,
        }
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn index(&self) -> &Arc<SimilarityIndex> {
        &self.index
    }

    pub fn provider(&self) -> &Arc<dyn Provider> {
        &self.provider
    }

    pub fn config(&self) -> &RecommenderConfig {
        &self.config
    }

    fn request(&self, model: &str, messages: Vec<ChatMessage>, seed: Option<u64>) -> ChatRequest {
        ChatRequest {
            messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
            model_id: model.to_string(),
            seed,
        }
    }

    /// Stage one: the idealized course description for `query`.
    pub async fn generate_ideal_description(
        &self,
        query: &StudentQuery,
        seed: Option<u64>,
    ) -> Result<IdealDescription, RecommendError> {
        let sanitized = sanitize(&query.text);
        let messages = IDEAL_DESCRIPTION.render(&[("query", sanitized.trim())]);
        let request = self.request(&self.config.generation_model, messages, seed);
        let text = self
            .provider
            .chat(&request)
            .await
            .map_err(|source| RecommendError::Provider {
                stage: Stage::IdealDescription,
                source,
            })?;
        let text = text.trim().to_string();
        if text.is_empty() {
            return Err(RecommendError::Provider {
                stage: Stage::IdealDescription,
                source: ProviderError::MalformedResponse("empty description".into()),
            });
        }
        Ok(IdealDescription {
            text,
            source_query_digest: query.digest(),
        })
    }

    /// Ideal description, its embedding, and the top-`k` search. Courses
    /// failing the level filter are skipped inside the search; an empty bundle
    /// is returned when nothing passes.
    pub async fn retrieve_context(
        &self,
        query: &StudentQuery,
        k: usize,
        seed: Option<u64>,
    ) -> Result<ContextBundle, RecommendError> {
        let mut stages = Vec::new();
        self.retrieve(query, k, seed, &mut stages)
            .await
            .map(|(bundle, _)| bundle)
    }

    async fn retrieve(
        &self,
        query: &StudentQuery,
        k: usize,
        seed: Option<u64>,
        stages: &mut Vec<Stage>,
    ) -> Result<(ContextBundle, Duration), RecommendError> {
        if k == 0 {
            return Err(IndexError::InvalidK.into());
        }
        stages.push(Stage::IdealDescription);
        let ideal = self.generate_ideal_description(query, seed).await?;

        stages.push(Stage::Embedding);
        let embedding =
            self.provider
                .embed(&ideal.text)
                .await
                .map_err(|source| RecommendError::Provider {
                    stage: Stage::Embedding,
                    source,
                })?;

        stages.push(Stage::Retrieval);
        let search_started = Instant::now();
        let courses = self.index.top_k(&embedding, k, query.level_filter)?;
        let search = search_started.elapsed();
        tracing::debug!(
            retrieved = courses.len(),
            search_us = search.as_micros() as u64,
            "context retrieved"
        );

        let context_text = format_context(&courses, &self.catalog);
        Ok((
            ContextBundle {
                ideal,
                courses,
                context_text,
            },
            search,
        ))
    }

    /// Runs the whole pipeline.
    pub async fn recommend(
        &self,
        query: &StudentQuery,
        options: &RecommendOptions,
    ) -> Result<RecommendationResponse, RecommendError> {
        let started = Instant::now();
        if self.index.count_matching(query.level_filter) == 0 {
            return Err(RecommendError::EmptyCorpus {
                filter: query.level_filter,
            });
        }

        let k = options.k.unwrap_or(self.config.k);
        let mut stages = Vec::new();
        let (context, search) = self.retrieve(query, k, options.seed, &mut stages).await?;
        let retrieval = started.elapsed();
        if context.courses.is_empty() {
            return Err(RecommendError::EmptyCorpus {
                filter: query.level_filter,
            });
        }

        stages.push(Stage::Recommendation);
        let sanitized = sanitize(&query.text);
        let messages =
            RECOMMENDATION.render(&[("context", &context.context_text), ("query", sanitized.trim())]);
        let mut request = self.request(&self.config.reasoning_model, messages, options.seed);
        let chat = |request: ChatRequest| async move {
            self.provider
                .chat(&request)
                .await
                .map_err(|source| RecommendError::Provider {
                    stage: Stage::Recommendation,
                    source,
                })
        };

        let mut raw_output = chat(request.clone()).await?;
        let mut reprompted = false;
        let parsed = match parse_recommendations(&raw_output, &context) {
            Ok(parsed) => parsed,
            Err(first) => {
                tracing::warn!(error = %first, "unparseable recommendations; reprompting once");
                request.messages.push(ChatMessage::assistant(raw_output.clone()));
                request.messages.push(ChatMessage::user(FORMAT_REMINDER));
                raw_output = chat(request).await?;
                reprompted = true;
                parse_recommendations(&raw_output, &context).map_err(|reason| {
                    RecommendError::ParseFailure {
                        reason,
                        raw_output: raw_output.clone(),
                    }
                })?
            }
        };
        for warning in &parsed.warnings {
            tracing::warn!(%warning, "recommendation adjusted");
        }

        Ok(RecommendationResponse {
            recommendations: parsed.recommendations,
            context,
            raw_output,
            warnings: parsed.warnings,
            stages,
            template_digests: TemplateDigests::current(),
            reprompted,
            timing: Timing {
                retrieval,
                search,
                total: started.elapsed(),
            },
        })
    }
}
