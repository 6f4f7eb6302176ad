//! `bookrec`: ingest ratings, generate synthetic corpora, recommend,
//! evaluate and sweep parameters of the hybrid book/author recommender.
//!
//! Exit status: 0 success, 1 input error, 2 domain error (for example an
//! unknown user), 3 internal error.

mod commands;
mod config;
mod error;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::{Failure, Result};

#[derive(Parser)]
#[command(name = "bookrec", version, about)]
struct Cli {
    /// Config file with `key = value` lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring config keys.
#[derive(Args, Default)]
struct Overrides {
    /// Ratings file (CSV, or JSON lines for .jsonl/.ndjson/.json)
    #[arg(long, global = true)]
    ratings: Option<String>,
    /// Directory for reports, snapshots and the matrix cache
    #[arg(long, global = true)]
    out_dir: Option<String>,
    /// Matrix cache directory [default: <out-dir>/cache]
    #[arg(long, global = true)]
    cache_dir: Option<String>,
    /// Always retrain instead of using cached matrices
    #[arg(long, global = true)]
    no_cache: bool,
    /// Fraction of events (by date) used for training
    #[arg(long, global = true)]
    split_fraction: Option<String>,
    /// cosine, ieuc, cooc, cooc2-cosine or cooc2-ieuc
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Author aggregation: rrf or cfpa
    #[arg(long, global = true)]
    agg_author: Option<String>,
    /// Book aggregation: rrf or cfpa
    #[arg(long, global = true)]
    agg_book: Option<String>,
    /// CFPA author weight: avg (mean rating) or count (preferred books)
    #[arg(long, global = true)]
    author_weight: Option<String>,
    #[arg(long, global = true)]
    rrf_k: Option<String>,
    /// Weight of the author branch in [0, 1]
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Books kept per recommended author
    #[arg(long, global = true)]
    limit: Option<String>,
    #[arg(long, global = true)]
    top_n: Option<String>,
    /// Minimum rating for a preferred book
    #[arg(long, global = true)]
    threshold: Option<String>,
    /// Minimum test rating for a hit
    #[arg(long, global = true)]
    relevance_threshold: Option<String>,
    /// Synthetic users
    #[arg(long, global = true)]
    users: Option<String>,
    /// Synthetic authors
    #[arg(long, global = true)]
    authors: Option<String>,
    /// Synthetic books per author
    #[arg(long, global = true)]
    books_per_author: Option<String>,
    /// Synthetic author affinity in [0, 1]
    #[arg(long, global = true)]
    affinity: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        let pairs = [
            ("ratings", &self.ratings),
            ("out_dir", &self.out_dir),
            ("cache_dir", &self.cache_dir),
            ("split_fraction", &self.split_fraction),
            ("scheme", &self.scheme),
            ("agg_author", &self.agg_author),
            ("agg_book", &self.agg_book),
            ("author_weight", &self.author_weight),
            ("rrf_k", &self.rrf_k),
            ("alpha", &self.alpha),
            ("limit", &self.limit),
            ("top_n", &self.top_n),
            ("threshold", &self.threshold),
            ("relevance_threshold", &self.relevance_threshold),
            ("users", &self.users),
            ("authors", &self.authors),
            ("books_per_author", &self.books_per_author),
            ("affinity", &self.affinity),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v).map_err(|e| Failure::input(format!("--{}: {}", key.replace('_', "-"), e.message())))?;
            }
        }
        if self.no_cache {
            cfg.use_cache = false;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load and split a ratings file, print counts, write a sorted snapshot
    Ingest,
    /// Generate a synthetic ratings file with planted author affinity
    Synth {
        #[arg(long)]
        seed: u64,
        /// Output file [default: <out-dir>/synth.csv]
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Top-n books for one user, trained on the whole ratings file
    Recommend {
        #[arg(long)]
        user: String,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// MRR on the temporal test split; writes report.json
    Evaluate,
    /// Parameter sweeps written as CSV
    Sweep {
        #[command(subcommand)]
        kind: Sweep,
    },
}

#[derive(Subcommand)]
enum Sweep {
    /// Every scheme and aggregation, books only and authors only
    Similarity,
    /// Books per author with the author branch alone
    Limit {
        /// `a..b` or a comma-separated list
        #[arg(long, default_value = "1..8")]
        limits: String,
    },
    /// Alpha grid over all aggregation pairs
    Alpha {
        /// Grid intervals between 0 and 1
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    cli.overrides.apply(&mut cfg)?;
    cfg.validate()?;

    // paths are checked before any work starts
    if !matches!(cli.command, Command::Synth { .. }) {
        cfg.ratings_path()?;
    }
    let mut dirs = Vec::new();
    match &cli.command {
        Command::Synth { output: Some(_), .. } => {}
        Command::Synth { output: None, .. } => dirs.push(cfg.out_dir.clone()),
        Command::Recommend { .. } => {}
        _ => dirs.push(cfg.out_dir.clone()),
    }
    if cfg.use_cache && !matches!(cli.command, Command::Synth { .. } | Command::Ingest) {
        dirs.push(cfg.cache_dir());
    }
    for dir in dirs {
        std::fs::create_dir_all(&dir)
            .map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
    }

    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Synth { seed, output } => {
            cfg.seed = Some(seed);
            commands::synth(&cfg, output)
        }
        Command::Recommend { user, output } => commands::recommend(&cfg, &user, output.as_deref()),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Sweep { kind } => match kind {
            Sweep::Similarity => commands::sweep_similarity(&cfg),
            Sweep::Limit { limits } => {
                let limits = commands::parse_limits(&limits)?;
                commands::sweep_limit(&cfg, &limits)
            }
            Sweep::Alpha { steps } => commands::sweep_alpha(&cfg, steps),
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
