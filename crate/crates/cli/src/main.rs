mod cost;
mod exp;
mod setup;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use compass_core::catalog::{embed_catalog, EmbedOptions};
use compass_core::recommender::RecommendOptions;
use compass_core::synthetic::{embedded_catalog, text_catalog, ALL_LEVELS, UNDERGRADUATE_LEVELS};
use compass_core::{build_index, CatalogFormat, EmbeddingVector, LevelFilter, StudentQuery};
use compass_service::ServiceConfig;

use setup::{CatalogArgs, ProviderArgs};

#[derive(Parser)]
#[command(name = "compass", version, about = "Two-stage LLM course recommender")]
struct Cli {
    /// Log filter, e.g. `info` or `compass_core=debug`. Overrides RUST_LOG.
    #[arg(long, global = true)]
    log: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a CSV or JSONL catalog to validated JSONL.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill in missing course embeddings.
    Embed {
        #[command(flatten)]
        catalog: CatalogArgs,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Embedding requests in flight at once.
        #[arg(long, default_value_t = 8)]
        batch: usize,
        /// Output file; the input catalog is rewritten when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank catalog courses against a stored embedding (JSON lines of results).
    Search {
        #[arg(long)]
        catalog: PathBuf,
        /// JSON file holding an array of numbers or `{"embedding": [...]}`.
        #[arg(long)]
        query_embedding: PathBuf,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long, default_value = "all")]
        levels: LevelFilter,
    },
    /// Run the full pipeline for one query.
    Recommend {
        #[command(flatten)]
        catalog: CatalogArgs,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "all")]
        levels: LevelFilter,
        /// Context size (courses retrieved for the second stage).
        #[arg(long)]
        k: Option<usize>,
        /// Sampling seed forwarded to the provider.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the full response as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Start the HTTP service.
    Serve {
        /// TOML service config; COMPASS_* environment variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Evaluation experiments.
    #[command(subcommand)]
    Exp(exp::ExpCommand),
    /// Write a seeded synthetic catalog.
    Synth {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict levels to 100-400.
        #[arg(long)]
        undergraduate: bool,
        /// Attach random unit embeddings of this dimension instead of topical text.
        #[arg(long)]
        random_embeddings: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for CatalogFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => CatalogFormat::Csv,
            FormatArg::Jsonl => CatalogFormat::Jsonl,
        }
    }
}

fn init_logging(filter: Option<&str>, json: bool) {
    use tracing_subscriber::EnvFilter;
    let filter = match filter {
        Some(f) => EnvFilter::new(f),
        None => EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
    };
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

#[tokio::main]
async fn main() -> Result<()> {
    let cli = Cli::parse();
    let serving = matches!(cli.command, Command::Serve { .. });
    init_logging(cli.log.as_deref().or(serving.then_some("info")), serving);

    match cli.command {
        Command::Ingest { input, format, out } => {
            let format = match format {
                Some(f) => f.into(),
                None => CatalogFormat::from_path(&input).with_context(|| {
                    format!("cannot infer the format of {}; pass --format", input.display())
                })?,
            };
            let catalog = compass_core::Catalog::load(&input, format)?;
            for warning in catalog.warnings() {
                eprintln!("warning: {warning}");
            }
            catalog.save(&out)?;
            eprintln!("wrote {} courses to {}", catalog.len(), out.display());
        }
        Command::Embed {
            catalog: args,
            provider,
            batch,
            out,
        } => {
            let provider = setup::build_provider(&provider)?;
            let mut catalog = setup::load_catalog(&args.catalog)?;
            let cache = args.open_cache()?;
            let result = embed_catalog(
                &mut catalog,
                provider.as_ref(),
                EmbedOptions {
                    batch_size: batch,
                    cache: cache.as_ref(),
                },
            )
            .await;
            // Keep whatever succeeded, even on partial failure.
            let out = out.unwrap_or(args.catalog);
            catalog.save(&out)?;
            let report = result?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Search {
            catalog,
            query_embedding,
            k,
            levels,
        } => {
            let catalog = setup::load_catalog(&catalog)?;
            let index = build_index(&catalog).context("building the similarity index")?;
            let query = read_embedding(&query_embedding)?;
            for scored in index.top_k(&query, k, levels)? {
                println!("{}", serde_json::to_string(&scored)?);
            }
        }
        Command::Recommend {
            catalog,
            provider,
            query,
            levels,
            k,
            seed,
            json,
        } => {
            let recommender = setup::build_recommender(&catalog, &provider).await?;
            let query = StudentQuery::new(query, levels)?;
            let response = recommender
                .recommend(&query, &RecommendOptions { k, seed })
                .await?;
            if json {
                println!("{}", serde_json::to_string_pretty(&response)?);
            } else {
                println!("Ideal course: {}\n", response.context.ideal.text);
                for (i, rec) in response.recommendations.iter().enumerate() {
                    let title = recommender
                        .catalog()
                        .get(&rec.course_id)
                        .map(|c| c.title.as_str())
                        .unwrap_or_default();
                    println!("{:>2}. {} — {} [{}]", i + 1, rec.course_id, title, rec.confidence);
                    println!("    {}", rec.rationale);
                }
                for warning in &response.warnings {
                    eprintln!("warning: {warning}");
                }
                eprintln!(
                    "retrieval {:.1} ms, total {:.1} ms",
                    response.timing.retrieval.as_secs_f64() * 1e3,
                    response.timing.total.as_secs_f64() * 1e3
                );
            }
        }
        Command::Serve {
            config,
            bind,
            catalog,
        } => {
            let mut config = match config {
                Some(path) => ServiceConfig::load(path)?,
                None => ServiceConfig::default(),
            }
            .apply_env()?;
            if let Some(bind) = bind {
                config.bind_address = bind;
            }
            if let Some(catalog) = catalog {
                config.catalog_path = catalog;
            }
            compass_service::run(config).await?;
        }
        Command::Exp(command) => exp::run(command).await?,
        Command::Synth {
            count,
            seed,
            undergraduate,
            random_embeddings,
            out,
        } => {
            let levels: &[u32] = if undergraduate {
                &UNDERGRADUATE_LEVELS
            } else {
                &ALL_LEVELS
            };
            let catalog = match random_embeddings {
                Some(0) => bail!("--random-embeddings must be positive"),
                Some(dimension) => embedded_catalog(count, dimension, seed, levels),
                None => text_catalog(count, seed, levels),
            };
            catalog.save(&out)?;
            eprintln!("wrote {} courses to {}", catalog.len(), out.display());
        }
    }
    Ok(())
}

fn read_embedding(path: &std::path::Path) -> Result<EmbeddingVector> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum Input {
        Bare(Vec<f64>),
        Wrapped { embedding: Vec<f64> },
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let values = match serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))? {
        Input::Bare(v) | Input::Wrapped { embedding: v } => v,
    };
    Ok(EmbeddingVector::new(values)?)
}
