use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::Extension;
use axum::Json;
use compass_core::recommender::{Confidence, RecommendOptions};
use compass_core::{LevelFilter, StudentQuery};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::{AppState, RequestId};

/// Largest context a client may request.
pub const MAX_K: usize = 500;

#[derive(Debug, Deserialize)]
pub struct RecommendRequestBody {
    pub query: String,
    #[serde(default = "default_levels")]
    pub levels: String,
    #[serde(default)]
    pub k: Option<usize>,
}

fn default_levels() -> String {
    "all".into()
}

/// The four level buckets clients may select.
pub fn parse_levels(levels: &str) -> Option<LevelFilter> {
    let filter: LevelFilter = levels.parse().ok()?;
    LevelFilter::standard_buckets()
        .contains(&filter)
        .then_some(filter)
}

#[derive(Debug, Serialize)]
pub struct RecommendationItem {
    pub course_id: String,
    pub rationale: String,
    pub confidence: Confidence,
}

#[derive(Debug, Serialize)]
pub struct ContextItem {
    pub course_id: String,
    pub similarity: f64,
    pub rank: usize,
}

#[derive(Debug, Serialize)]
pub struct TimingBody {
    pub retrieval_ms: f64,
    pub search_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct RecommendResponseBody {
    pub request_id: String,
    pub recommendations: Vec<RecommendationItem>,
    pub ideal_description: String,
    pub context: Vec<ContextItem>,
    pub timing: TimingBody,
    pub warnings: Vec<String>,
    pub reprompted: bool,
    pub template_digests: compass_core::recommender::TemplateDigests,
}

pub async fn recommend(
    State(state): State<AppState>,
    Extension(RequestId(request_id)): Extension<RequestId>,
    body: Bytes,
) -> Result<Json<RecommendResponseBody>, ApiError> {
    let body: RecommendRequestBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))?;
    let filter = parse_levels(&body.levels).ok_or_else(|| {
        ApiError::bad_request(format!(
            "levels must be one of \"all\", \"100-200\", \"300-400\", \"500+\" (got {:?})",
            body.levels
        ))
    })?;
    if let Some(k) = body.k {
        if k == 0 || k > MAX_K {
            return Err(ApiError::bad_request(format!("k must be between 1 and {MAX_K}")));
        }
    }
    let query = StudentQuery::new(body.query, filter)?;

    let _permit = state.limiter.clone().try_acquire_owned().map_err(|_| {
        tracing::warn!(%request_id, "concurrency cap reached");
        ApiError::busy()
    })?;

    let started = Instant::now();
    let options = RecommendOptions {
        k: body.k,
        seed: None,
    };
    let response = tokio::time::timeout(
        state.request_timeout,
        state.recommender.recommend(&query, &options),
    )
    .await
    .map_err(|_| {
        tracing::warn!(%request_id, levels = %filter, "recommendation timed out");
        ApiError::timeout()
    })?
    .inspect_err(|e| tracing::warn!(%request_id, levels = %filter, error = %e, "recommendation failed"))?;

    tracing::info!(
        %request_id,
        levels = %filter,
        k = response.context.courses.len(),
        recommendations = response.recommendations.len(),
        retrieval_ms = response.timing.retrieval.as_secs_f64() * 1e3,
        total_ms = response.timing.total.as_secs_f64() * 1e3,
        handler_ms = started.elapsed().as_secs_f64() * 1e3,
        reprompted = response.reprompted,
        "recommendation served"
    );

    Ok(Json(RecommendResponseBody {
        request_id,
        recommendations: response
            .recommendations
            .into_iter()
            .map(|r| RecommendationItem {
                course_id: r.course_id,
                rationale: r.rationale,
                confidence: r.confidence,
            })
            .collect(),
        ideal_description: response.context.ideal.text,
        context: response
            .context
            .courses
            .into_iter()
            .map(|c| ContextItem {
                course_id: c.course_id,
                similarity: c.similarity,
                rank: c.rank,
            })
            .collect(),
        timing: TimingBody {
            retrieval_ms: response.timing.retrieval.as_secs_f64() * 1e3,
            search_ms: response.timing.search.as_secs_f64() * 1e3,
            total_ms: response.timing.total.as_secs_f64() * 1e3,
        },
        warnings: response.warnings,
        reprompted: response.reprompted,
        template_digests: response.template_digests,
    }))
}

#[derive(Debug, Serialize)]
pub struct CourseBody<'a> {
    pub course_id: &'a str,
    pub level: u32,
    pub subject: &'a str,
    pub title: &'a str,
    pub description: &'a str,
}

pub async fn course(
    State(state): State<AppState>,
    Path(course_id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let catalog = state.recommender.catalog();
    let course = catalog
        .get(&course_id)
        .or_else(|| catalog.get(course_id.trim()))
        .ok_or_else(|| ApiError::not_found(format!("no course with id {course_id:?}")))?;
    let body = CourseBody {
        course_id: &course.course_id,
        level: course.level,
        subject: &course.subject,
        title: &course.title,
        description: &course.description,
    };
    Ok(Json(serde_json::to_value(body).expect("course serializes")))
}

#[derive(Debug, Serialize)]
pub struct HealthBody {
    pub status: &'static str,
    pub catalog_size: usize,
    pub dimension: usize,
    pub provider_mode: compass_core::provider::ProviderMode,
}

pub async fn health(State(state): State<AppState>) -> Json<HealthBody> {
    Json(HealthBody {
        status: "ok",
        catalog_size: state.recommender.catalog().len(),
        dimension: state.recommender.index().dimension(),
        provider_mode: state.recommender.provider().mode(),
    })
}
