//! `compass exp …`: experiment runners that persist JSONL trials plus CSV
//! summaries.

use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use compass_core::experiments::{
    bias_pairs, latency_bench, latency_csv, latency_markdown, rank_likelihood, subject_network, write_jsonl,
    ExperimentOptions, LabeledQuery,
};
use compass_core::{LevelFilter, StudentQuery};
use serde::Deserialize;

use crate::cost;
use crate::setup::{self, CatalogArgs, ProviderArgs};

#[derive(Subcommand)]
pub enum ExpCommand {
    /// Subject similarity network from mean course embeddings.
    Network {
        #[command(flatten)]
        catalog: CatalogArgs,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Comma-separated subject codes; every subject in the catalog when omitted.
        #[arg(long, value_delimiter = ',')]
        subjects: Vec<String>,
        /// JSON output; `.dot` and `.csv` siblings are written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// How often each context rank is recommended.
    Ranks {
        #[command(flatten)]
        common: ExpArgs,
        /// Query file: JSON lines `{"id", "query", "levels"}` or one query per line.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Paired queries differing in one descriptor.
    Bias {
        #[command(flatten)]
        common: ExpArgs,
        /// Query template with one `{}` placeholder.
        #[arg(long)]
        template: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Name of the varied attribute, used in trial ids.
        #[arg(long, default_value = "descriptor")]
        attribute: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value = "all")]
        levels: LevelFilter,
    },
    /// Retrieval and total time per level filter.
    Latency {
        #[command(flatten)]
        common: ExpArgs,
        #[arg(
            long,
            default_value = "I want to learn how machine learning models are trained and evaluated"
        )]
        query: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Comma-separated level filters.
        #[arg(long, value_delimiter = ',', default_value = "all,100-200,300-400,500+")]
        levels: Vec<LevelFilter>,
    },
}

#[derive(Args)]
pub struct ExpArgs {
    #[command(flatten)]
    catalog: CatalogArgs,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials in flight at once.
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    /// Context size override.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Skip the confirmation prompt for live runs.
    #[arg(long)]
    yes: bool,
    /// USD per million input tokens, for the live-run estimate.
    #[arg(long)]
    input_price: Option<f64>,
    /// USD per million output tokens, for the live-run estimate.
    #[arg(long)]
    output_price: Option<f64>,
}

impl ExpArgs {
    fn options(&self) -> ExperimentOptions {
        ExperimentOptions {
            seed: self.seed,
            concurrency: self.concurrency,
            k: self.k,
        }
    }

    /// Prints the cost estimate for live runs and asks for confirmation.
    fn confirm_live(&self, catalog: &compass_core::Catalog, runs: usize, query_chars: usize) -> Result<()> {
        if !self.provider.is_live() {
            return Ok(());
        }
        let k = self.k.unwrap_or(compass_core::recommender::DEFAULT_CONTEXT_SIZE);
        let estimate = cost::estimate(catalog, runs, k, query_chars);
        eprintln!(
            "live run: {}",
            estimate.render(self.input_price, self.output_price)
        );
        if self.yes {
            return Ok(());
        }
        if !std::io::stdin().is_terminal() {
            bail!("live experiments need confirmation; rerun with --yes");
        }
        eprint!("proceed? [y/N] ");
        std::io::stderr().flush()?;
        let mut answer = String::new();
        std::io::stdin().lock().read_line(&mut answer)?;
        if !matches!(answer.trim(), "y" | "Y" | "yes") {
            bail!("aborted");
        }
        Ok(())
    }

    fn output(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(name))
    }
}

#[derive(Deserialize)]
struct QueryLine {
    id: Option<String>,
    query: String,
    #[serde(default)]
    levels: Option<String>,
}

pub fn read_queries(path: &Path) -> Result<Vec<LabeledQuery>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut queries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed = if line.starts_with('{') {
            serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), n + 1))?
        } else {
            QueryLine {
                id: None,
                query: line.to_string(),
                levels: None,
            }
        };
        let levels: LevelFilter = parsed
            .levels
            .as_deref()
            .unwrap_or("all")
            .parse()
            .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        let id = parsed.id.unwrap_or_else(|| format!("q{}", queries.len() + 1));
        if queries.iter().any(|q: &LabeledQuery| q.id == id) {
            bail!("{}:{}: duplicate query id {id}", path.display(), n + 1);
        }
        queries.push(LabeledQuery {
            id,
            query: StudentQuery::new(parsed.query, levels)?,
        });
    }
    if queries.is_empty() {
        bail!("{} contains no queries", path.display());
    }
    Ok(queries)
}

pub async fn run(command: ExpCommand) -> Result<()> {
    match command {
        ExpCommand::Network {
            catalog,
            provider,
            subjects,
            out,
        } => {
            let provider = setup::build_provider(&provider)?;
            let catalog = setup::embedded_catalog(&catalog, provider.as_ref()).await?;
            let subjects: Vec<String> = if subjects.is_empty() {
                catalog.subjects().into_iter().map(String::from).collect()
            } else {
                subjects
            };
            let refs: Vec<&str> = subjects.iter().map(String::as_str).collect();
            let network = subject_network(&catalog, &refs)?;
            std::fs::write(&out, serde_json::to_string_pretty(&network)?)?;
            std::fs::write(out.with_extension("dot"), network.to_dot())?;
            std::fs::write(out.with_extension("csv"), network.to_csv()?)?;
            eprintln!(
                "{} subjects, {} edges → {}",
                network.nodes.len(),
                network.edges.len(),
                out.display()
            );
        }
        ExpCommand::Ranks {
            common,
            queries,
            trials,
        } => {
            let queries = read_queries(&queries)?;
            let recommender = setup::build_recommender(&common.catalog, &common.provider).await?;
            let query_chars = queries.iter().map(|q| q.query.text.len()).sum::<usize>() / queries.len();
            common.confirm_live(recommender.catalog(), queries.len() * trials, query_chars)?;
            let result = rank_likelihood(&recommender, &queries, trials, &common.options()).await?;
            write_jsonl(common.output("ranks_trials.jsonl")?, &result.trials)?;
            std::fs::write(common.output("ranks.csv")?, result.to_csv()?)?;
            std::fs::write(
                common.output("ranks.json")?,
                serde_json::to_string_pretty(&result)?,
            )?;
            report_failures(&result.failures);
            println!("rank,pooled,per_query_mean");
            for (r, (p, m)) in result
                .pooled
                .per_rank
                .iter()
                .zip(&result.per_query_mean.per_rank)
                .enumerate()
                .take(15)
            {
                println!("{},{p:.3},{m:.3}", r + 1);
            }
        }
        ExpCommand::Bias {
            common,
            template,
            a,
            b,
            attribute,
            trials,
            levels,
        } => {
            let recommender = setup::build_recommender(&common.catalog, &common.provider).await?;
            common.confirm_live(
                recommender.catalog(),
                2 * trials,
                template.len() + a.len().max(b.len()),
            )?;
            let report = bias_pairs(
                &recommender,
                &template,
                &attribute,
                &a,
                &b,
                trials,
                levels,
                &common.options(),
            )
            .await?;
            write_jsonl(common.output("bias_trials.jsonl")?, &report.trials)?;
            std::fs::write(common.output("bias.csv")?, report.to_csv()?)?;
            std::fs::write(
                common.output("bias.json")?,
                serde_json::to_string_pretty(&report)?,
            )?;
            report_failures(&report.failures);
            println!("course_id,{a},{b},delta");
            for (course, pair) in &report.rates {
                println!(
                    "{course},{:.3},{:.3},{:+.3}",
                    pair.rate_a,
                    pair.rate_b,
                    pair.delta()
                );
            }
            eprintln!("max |delta| = {:.3}", report.max_abs_delta());
        }
        ExpCommand::Latency {
            common,
            query,
            trials,
            levels,
        } => {
            let recommender = setup::build_recommender(&common.catalog, &common.provider).await?;
            common.confirm_live(recommender.catalog(), levels.len() * trials, query.len())?;
            let rows = latency_bench(&recommender, &query, &levels, trials, &common.options()).await?;
            std::fs::write(common.output("latency.csv")?, latency_csv(&rows)?)?;
            std::fs::write(
                common.output("latency.json")?,
                serde_json::to_string_pretty(&rows)?,
            )?;
            let markdown = latency_markdown(&rows);
            std::fs::write(common.output("latency.md")?, &markdown)?;
            for row in &rows {
                report_failures(&row.failures);
            }
            print!("{markdown}");
        }
    }
    Ok(())
}

fn report_failures(failures: &[compass_core::experiments::TrialFailure]) {
    for f in failures {
        eprintln!("trial {} #{} failed: {}", f.query_id, f.trial_index, f.error);
    }
}
