//! Rank-likelihood: how often the course at each context rank is recommended.
//!
//! Counting is per appearance: a course recommended in a trial contributes
//! one count at the context rank it held in that trial. The pooled
//! distribution divides counts by the number of successful trials across all
//! queries; the per-query mean averages the per-query distributions so each
//! query weighs the same regardless of how many of its trials succeeded.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{run_trials, ExperimentError, ExperimentOptions, LabeledQuery, TrialFailure, TrialRecord};
use crate::recommender::Recommender;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankLikelihood {
    pub k: usize,
    /// `per_rank[r - 1]`: fraction of trials recommending the rank-`r` course.
    pub per_rank: Vec<f64>,
    /// `cumulative_share[r - 1]`: share of all recommendations drawn from
    /// ranks `1..=r`.
    pub cumulative_share: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRankDistribution {
    pub query_id: String,
    pub trials: usize,
    pub rank_counts: Vec<usize>,
    /// Context ranks held by each recommended course, one entry per appearance.
    pub course_ranks: BTreeMap<String, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankExperiment {
    pub pooled: RankLikelihood,
    pub per_query_mean: RankLikelihood,
    pub per_query: Vec<QueryRankDistribution>,
    pub trials: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

fn likelihood(k: usize, counts: &[usize], trials: usize) -> RankLikelihood {
    let per_rank = counts
        .iter()
        .map(|&c| {
            if trials == 0 {
                0.0
            } else {
                c as f64 / trials as f64
            }
        })
        .collect();
    RankLikelihood {
        k,
        per_rank,
        cumulative_share: cumulative(counts),
    }
}

fn cumulative(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    let mut running = 0usize;
    counts
        .iter()
        .map(|&c| {
            running += c;
            if total == 0 {
                0.0
            } else {
                running as f64 / total as f64
            }
        })
        .collect()
}

/// Reduces trial records to pooled and per-query rank distributions over
/// ranks `1..=k`. Records with ranks above `k` are ignored.
pub fn aggregate_ranks(
    trials: &[TrialRecord],
    k: usize,
) -> (RankLikelihood, RankLikelihood, Vec<QueryRankDistribution>) {
    let mut per_query: Vec<QueryRankDistribution> = Vec::new();
    for trial in trials {
        let slot = match per_query.iter().position(|q| q.query_id == trial.query_id) {
            Some(i) => i,
            None => {
                per_query.push(QueryRankDistribution {
                    query_id: trial.query_id.clone(),
                    trials: 0,
                    rank_counts: vec![0; k],
                    course_ranks: BTreeMap::new(),
                });
                per_query.len() - 1
            }
        };
        let dist = &mut per_query[slot];
        dist.trials += 1;
        for rec in &trial.recommended {
            if rec.context_rank == 0 || rec.context_rank > k {
                continue;
            }
            dist.rank_counts[rec.context_rank - 1] += 1;
            dist.course_ranks
                .entry(rec.course_id.clone())
                .or_default()
                .push(rec.context_rank);
        }
    }

    let mut pooled_counts = vec![0usize; k];
    for dist in &per_query {
        for (p, c) in pooled_counts.iter_mut().zip(&dist.rank_counts) {
            *p += c;
        }
    }
    let pooled = likelihood(k, &pooled_counts, trials.len());

    let mut mean = vec![0.0; k];
    for dist in &per_query {
        let l = likelihood(k, &dist.rank_counts, dist.trials);
        for (m, v) in mean.iter_mut().zip(&l.per_rank) {
            *m += v / per_query.len() as f64;
        }
    }
    let per_query_mean = RankLikelihood {
        k,
        per_rank: mean,
        cumulative_share: {
            let mut share = vec![0.0; k];
            let n = per_query.len() as f64;
            for dist in &per_query {
                for (s, v) in share.iter_mut().zip(cumulative(&dist.rank_counts)) {
                    *s += v / n;
                }
            }
            share
        },
    };
    (pooled, per_query_mean, per_query)
}

/// Runs `trials` recommendations per query and aggregates context ranks.
pub async fn rank_likelihood(
    recommender: &Recommender,
    queries: &[LabeledQuery],
    trials: usize,
    options: &ExperimentOptions,
) -> Result<RankExperiment, ExperimentError> {
    if queries.is_empty() || trials == 0 {
        return Err(ExperimentError::InvalidArgument(
            "rank experiment needs at least one query and one trial".into(),
        ));
    }
    let k = options.k.unwrap_or(recommender.config().k);
    let (records, failures) = run_trials(recommender, queries, trials, options).await;
    let (pooled, per_query_mean, per_query) = aggregate_ranks(&records, k);
    Ok(RankExperiment {
        pooled,
        per_query_mean,
        per_query,
        trials: records,
        failures,
    })
}

impl RankExperiment {
    /// `rank,pooled,per_query_mean,cumulative_share` rows.
    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["rank", "pooled", "per_query_mean", "cumulative_share"])?;
        for r in 0..self.pooled.k {
            writer.write_record([
                (r + 1).to_string(),
                self.pooled.per_rank[r].to_string(),
                self.per_query_mean.per_rank[r].to_string(),
                self.pooled.cumulative_share[r].to_string(),
            ])?;
        }
        let bytes = writer.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}
