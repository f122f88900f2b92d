//! Paired-query recommendation rates.
//!
//! Two queries are rendered from one template that differ only in the value
//! substituted for the placeholder. Rates are appearances divided by the
//! number of successful trials for that variant, reported over the union of
//! each variant's ten most-recommended courses (ties broken by course id).

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{run_trials, ExperimentError, ExperimentOptions, LabeledQuery, TrialFailure, TrialRecord};
use crate::catalog::LevelFilter;
use crate::recommender::{Recommender, StudentQuery};

pub const PLACEHOLDER: &str = "{}";
const TOP_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub rate_a: f64,
    pub rate_b: f64,
}

impl RatePair {
    pub fn delta(&self) -> f64 {
        self.rate_a - self.rate_b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub attribute: String,
    pub variant_a: String,
    pub variant_b: String,
    pub trials_per_variant: usize,
    pub successful_a: usize,
    pub successful_b: usize,
    pub rates: BTreeMap<String, RatePair>,
    pub trials: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

fn render(template: &str, value: &str) -> Result<String, ExperimentError> {
    if template.matches(PLACEHOLDER).count() != 1 {
        return Err(ExperimentError::InvalidArgument(format!(
            "template must contain exactly one {PLACEHOLDER} placeholder"
        )));
    }
    Ok(template.replacen(PLACEHOLDER, value, 1))
}

fn appearance_counts<'a>(trials: impl Iterator<Item = &'a TrialRecord>) -> (HashMap<String, usize>, usize) {
    let mut counts = HashMap::new();
    let mut n = 0;
    for trial in trials {
        n += 1;
        for rec in &trial.recommended {
            *counts.entry(rec.course_id.clone()).or_insert(0) += 1;
        }
    }
    (counts, n)
}

fn top_courses(counts: &HashMap<String, usize>) -> Vec<String> {
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(TOP_N).map(|(id, _)| id.clone()).collect()
}

fn rate(count: usize, trials: usize) -> f64 {
    if trials == 0 {
        0.0
    } else {
        count as f64 / trials as f64
    }
}

/// Reduces raw trials for the two variants (identified by query id) to a
/// rate map.
pub fn aggregate_bias(
    trials: &[TrialRecord],
    id_a: &str,
    id_b: &str,
) -> (BTreeMap<String, RatePair>, usize, usize) {
    let (counts_a, n_a) = appearance_counts(trials.iter().filter(|t| t.query_id == id_a));
    let (counts_b, n_b) = appearance_counts(trials.iter().filter(|t| t.query_id == id_b));
    let mut rates = BTreeMap::new();
    for id in top_courses(&counts_a).into_iter().chain(top_courses(&counts_b)) {
        let pair = RatePair {
            rate_a: rate(counts_a.get(&id).copied().unwrap_or(0), n_a),
            rate_b: rate(counts_b.get(&id).copied().unwrap_or(0), n_b),
        };
        rates.insert(id, pair);
    }
    (rates, n_a, n_b)
}

#[allow(clippy::too_many_arguments)]
pub async fn bias_pairs(
    recommender: &Recommender,
    template: &str,
    attribute: &str,
    variant_a: &str,
    variant_b: &str,
    trials: usize,
    level_filter: LevelFilter,
    options: &ExperimentOptions,
) -> Result<BiasReport, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::InvalidArgument(
            "trials must be at least 1".into(),
        ));
    }
    if variant_a == variant_b {
        return Err(ExperimentError::InvalidArgument("variants must differ".into()));
    }
    let query = |value: &str| -> Result<LabeledQuery, ExperimentError> {
        let text = render(template, value)?;
        Ok(LabeledQuery {
            id: format!("{attribute}={value}"),
            query: StudentQuery::new(text, level_filter)
                .map_err(|e| ExperimentError::InvalidArgument(e.to_string()))?,
        })
    };
    let queries = [query(variant_a)?, query(variant_b)?];
    let (records, failures) = run_trials(recommender, &queries, trials, options).await;
    let (rates, successful_a, successful_b) = aggregate_bias(&records, &queries[0].id, &queries[1].id);
    Ok(BiasReport {
        attribute: attribute.to_string(),
        variant_a: variant_a.to_string(),
        variant_b: variant_b.to_string(),
        trials_per_variant: trials,
        successful_a,
        successful_b,
        rates,
        trials: records,
        failures,
    })
}

impl BiasReport {
    pub fn max_abs_delta(&self) -> f64 {
        self.rates.values().map(|p| p.delta().abs()).fold(0.0, f64::max)
    }

    /// `course_id,rate_a,rate_b,delta` rows, largest absolute delta first.
    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut rows: Vec<(&String, &RatePair)> = self.rates.iter().collect();
        rows.sort_by(|a, b| {
            b.1.delta()
                .abs()
                .total_cmp(&a.1.delta().abs())
                .then_with(|| a.0.cmp(b.0))
        });
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["course_id", "rate_a", "rate_b", "delta"])?;
        for (id, pair) in rows {
            writer.write_record([
                id.clone(),
                pair.rate_a.to_string(),
                pair.rate_b.to_string(),
                pair.delta().to_string(),
            ])?;
        }
        let bytes = writer.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}
