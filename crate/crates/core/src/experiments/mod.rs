//! Evaluation harness.
//!
//! - [`network`]: subject-level embedding similarity graphs.
//! - [`ranks`]: how often each context rank ends up recommended.
//! - [`bias`]: recommendation rates for paired queries that differ in one
//!   descriptor.
//! - [`latency`]: retrieval and end-to-end timing per level filter.
//!
//! Trials run concurrently through a shared [`Recommender`]; each trial gets a
//! seed derived from the experiment seed, the query id, and the trial index,
//! so results do not depend on scheduling order. Aggregation is a plain reduce
//! over the collected [`TrialRecord`]s.

pub mod bias;
pub mod latency;
pub mod network;
pub mod ranks;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::seed_from_parts;
use crate::recommender::{RecommendOptions, Recommender, StudentQuery};

pub use bias::{aggregate_bias, bias_pairs, BiasReport, RatePair};
pub use latency::{latency_bench, latency_csv, latency_markdown, LatencyRow};
pub use network::{subject_embedding, subject_network, SubjectEdge, SubjectNetwork};
pub use ranks::{aggregate_ranks, rank_likelihood, QueryRankDistribution, RankExperiment, RankLikelihood};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown subject {0}")]
    UnknownSubject(String),
    #[error("subject {subject}: course {course_id} has no embedding")]
    MissingEmbedding { subject: String, course_id: String },
    #[error("subject {0}: course embeddings cancel to a zero mean")]
    ZeroMean(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentOptions {
    pub seed: u64,
    /// Trials in flight at once.
    pub concurrency: usize,
    /// Context size override; the recommender's configured `k` otherwise.
    pub k: Option<usize>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            concurrency: 4,
            k: None,
        }
    }
}

/// A query with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledQuery {
    pub id: String,
    pub query: StudentQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendedRank {
    pub course_id: String,
    pub context_rank: usize,
}

/// One pipeline run inside an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub query_id: String,
    pub trial_index: usize,
    pub seed: u64,
    pub recommended: Vec<RecommendedRank>,
    pub raw_output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub query_id: String,
    pub trial_index: usize,
    pub error: String,
}

pub(crate) fn trial_seed(base: u64, query_id: &str, trial_index: usize) -> u64 {
    seed_from_parts(&[
        &base.to_le_bytes(),
        query_id.as_bytes(),
        &(trial_index as u64).to_le_bytes(),
    ])
}

/// Runs `trials` recommendations for each query and returns the records in
/// (query order, trial index) order together with any failures.
pub(crate) async fn run_trials(
    recommender: &Recommender,
    queries: &[LabeledQuery],
    trials: usize,
    options: &ExperimentOptions,
) -> (Vec<TrialRecord>, Vec<TrialFailure>) {
    let plans: Vec<(usize, &LabeledQuery, usize)> = queries
        .iter()
        .enumerate()
        .flat_map(|(qi, q)| (0..trials).map(move |t| (qi, q, t)))
        .collect();

    let mut outcomes: Vec<(usize, usize, Result<TrialRecord, TrialFailure>)> = stream::iter(plans)
        .map(|(qi, labeled, trial_index)| async move {
            let seed = trial_seed(options.seed, &labeled.id, trial_index);
            let call = RecommendOptions {
                k: options.k,
                seed: Some(seed),
            };
            let outcome = match recommender.recommend(&labeled.query, &call).await {
                Ok(response) => Ok(TrialRecord {
                    query_id: labeled.id.clone(),
                    trial_index,
                    seed,
                    recommended: response
                        .recommendations
                        .iter()
                        .filter_map(|r| {
                            response
                                .context
                                .rank_of(&r.course_id)
                                .map(|rank| RecommendedRank {
                                    course_id: r.course_id.clone(),
                                    context_rank: rank,
                                })
                        })
                        .collect(),
                    raw_output: response.raw_output,
                }),
                Err(e) => {
                    tracing::warn!(query_id = %labeled.id, trial_index, error = %e, "trial failed");
                    Err(TrialFailure {
                        query_id: labeled.id.clone(),
                        trial_index,
                        error: e.to_string(),
                    })
                }
            };
            (qi, trial_index, outcome)
        })
        .buffer_unordered(options.concurrency.max(1))
        .collect()
        .await;
    outcomes.sort_by_key(|(qi, t, _)| (*qi, *t));

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (_, _, outcome) in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    (records, failures)
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<(), ExperimentError> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads trial records written by [`write_jsonl`].
pub fn read_trials(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>, ExperimentError> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(ExperimentError::from))
        .collect()
}
