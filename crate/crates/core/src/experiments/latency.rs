//! End-to-end and retrieval timing per level filter.
//!
//! Trials run sequentially so measurements do not contend with each other.

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{trial_seed, ExperimentError, ExperimentOptions, TrialFailure};
use crate::catalog::LevelFilter;
use crate::recommender::{RecommendOptions, Recommender, StudentQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub level_filter: LevelFilter,
    #[serde(with = "crate::recommender::duration_ms")]
    pub mean_total: Duration,
    /// Stage one, the embedding call, and the index search.
    #[serde(with = "crate::recommender::duration_ms")]
    pub mean_retrieval: Duration,
    /// Index search alone.
    #[serde(with = "crate::recommender::duration_ms")]
    pub mean_search: Duration,
    pub trials: usize,
    pub failures: Vec<TrialFailure>,
}

fn mean(total: Duration, n: usize) -> Duration {
    if n == 0 {
        Duration::ZERO
    } else {
        total / n as u32
    }
}

pub async fn latency_bench(
    recommender: &Recommender,
    query_text: &str,
    levels: &[LevelFilter],
    trials: usize,
    options: &ExperimentOptions,
) -> Result<Vec<LatencyRow>, ExperimentError> {
    if trials == 0 || levels.is_empty() {
        return Err(ExperimentError::InvalidArgument(
            "latency bench needs at least one level and one trial".into(),
        ));
    }
    let mut rows = Vec::with_capacity(levels.len());
    for &level_filter in levels {
        let query = StudentQuery::new(query_text, level_filter)
            .map_err(|e| ExperimentError::InvalidArgument(e.to_string()))?;
        let id = level_filter.to_string();
        let (mut total, mut retrieval, mut search) = (Duration::ZERO, Duration::ZERO, Duration::ZERO);
        let mut ok = 0usize;
        let mut failures = Vec::new();
        for trial_index in 0..trials {
            let call = RecommendOptions {
                k: options.k,
                seed: Some(trial_seed(options.seed, &id, trial_index)),
            };
            match recommender.recommend(&query, &call).await {
                Ok(response) => {
                    total += response.timing.total;
                    retrieval += response.timing.retrieval;
                    search += response.timing.search;
                    ok += 1;
                }
                Err(e) => {
                    tracing::warn!(level = %level_filter, trial_index, error = %e, "latency trial failed");
                    failures.push(TrialFailure {
                        query_id: id.clone(),
                        trial_index,
                        error: e.to_string(),
                    });
                }
            }
        }
        rows.push(LatencyRow {
            level_filter,
            mean_total: mean(total, ok),
            mean_retrieval: mean(retrieval, ok),
            mean_search: mean(search, ok),
            trials: ok,
            failures,
        });
    }
    Ok(rows)
}

fn label(filter: LevelFilter) -> String {
    match filter {
        LevelFilter::All => "All".to_string(),
        other => other.to_string(),
    }
}

/// Markdown table with one row per level filter, times in seconds.
pub fn latency_markdown(rows: &[LatencyRow]) -> String {
    let mut out =
        String::from("| Level | Total (s) | Retrieval (s) | Search (ms) | Trials |\n|---|---|---|---|---|\n");
    for row in rows {
        let _ = writeln!(
            out,
            "| {} | {:.3} | {:.3} | {:.3} | {} |",
            label(row.level_filter),
            row.mean_total.as_secs_f64(),
            row.mean_retrieval.as_secs_f64(),
            row.mean_search.as_secs_f64() * 1e3,
            row.trials
        );
    }
    out
}

pub fn latency_csv(rows: &[LatencyRow]) -> Result<String, ExperimentError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "level_filter",
        "mean_total_ms",
        "mean_retrieval_ms",
        "mean_search_ms",
        "trials",
        "failures",
    ])?;
    for row in rows {
        writer.write_record([
            row.level_filter.to_string(),
            (row.mean_total.as_secs_f64() * 1e3).to_string(),
            (row.mean_retrieval.as_secs_f64() * 1e3).to_string(),
            (row.mean_search.as_secs_f64() * 1e3).to_string(),
            row.trials.to_string(),
            row.failures.len().to_string(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
