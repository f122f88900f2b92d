//! Rough request and token counts for live experiment runs.
//!
//! Token counts use the common four-characters-per-token approximation; the
//! figures are meant for a go/no-go decision, not for billing.

use compass_core::recommender::prompts::{IDEAL_DESCRIPTION, RECOMMENDATION};
use compass_core::recommender::MAX_RECOMMENDATIONS;
use compass_core::Catalog;

const CHARS_PER_TOKEN: f64 = 4.0;
const IDEAL_DESCRIPTION_TOKENS: f64 = 200.0;
const TOKENS_PER_RECOMMENDATION: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CostEstimate {
    pub pipeline_runs: usize,
    pub chat_calls: usize,
    pub embedding_calls: usize,
    pub input_tokens: f64,
    pub output_tokens: f64,
}

/// Estimate for `runs` pipeline executions over `catalog` with context size
/// `k` and queries averaging `query_chars` characters.
pub fn estimate(catalog: &Catalog, runs: usize, k: usize, query_chars: usize) -> CostEstimate {
    let courses = catalog.len().max(1) as f64;
    let mean_course_chars = catalog
        .courses()
        .iter()
        .map(|c| (c.course_id.len() + c.title.len() + c.description.len() + 4) as f64)
        .sum::<f64>()
        / courses;
    let context_chars = mean_course_chars * k.min(catalog.len()) as f64;
    let stage_one = (IDEAL_DESCRIPTION.system.len() + IDEAL_DESCRIPTION.user.len() + query_chars) as f64;
    let stage_two =
        (RECOMMENDATION.system.len() + RECOMMENDATION.user.len() + query_chars) as f64 + context_chars;
    let per_run_input = (stage_one + stage_two) / CHARS_PER_TOKEN;
    let per_run_output = IDEAL_DESCRIPTION_TOKENS + TOKENS_PER_RECOMMENDATION * MAX_RECOMMENDATIONS as f64;
    CostEstimate {
        pipeline_runs: runs,
        chat_calls: 2 * runs,
        embedding_calls: runs,
        input_tokens: per_run_input * runs as f64,
        output_tokens: per_run_output * runs as f64,
    }
}

impl CostEstimate {
    pub fn render(&self, input_price_per_mtok: Option<f64>, output_price_per_mtok: Option<f64>) -> String {
        let mut out = format!(
            "{} pipeline runs: {} chat calls, {} embedding calls, ~{:.0} input tokens, ~{:.0} output tokens",
            self.pipeline_runs, self.chat_calls, self.embedding_calls, self.input_tokens, self.output_tokens
        );
        if let (Some(i), Some(o)) = (input_price_per_mtok, output_price_per_mtok) {
            let dollars = self.input_tokens / 1e6 * i + self.output_tokens / 1e6 * o;
            out.push_str(&format!(", ~${dollars:.2}"));
        }
        out
    }
}
