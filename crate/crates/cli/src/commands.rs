use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use bookrec_core::corpus::{
    load_ratings, synth_generate, temporal_order, temporal_split, write_ratings_csv, RatingsFormat,
    SplitCorpus, SynthParams,
};
use bookrec_core::evaluation::{
    alpha_grid, best_alpha, best_limit, best_similarity, evaluate_with_engine,
    sweep_alpha_with_engine, sweep_book_limit_with_engine, sweep_similarity_with,
    write_alpha_csv, write_limit_csv, write_similarity_csv,
};
use bookrec_core::{Engine, ItemKind, RatingEvent};

use crate::config::RunConfig;
use crate::error::{Failure, Result};
use crate::store::{write_atomic, MatrixCache};

fn load(cfg: &RunConfig) -> Result<Vec<RatingEvent>> {
    let path = cfg.ratings_path()?;
    let events = load_ratings(path, RatingsFormat::from_path(path))?;
    log::info!("loaded {} events from {}", events.len(), path.display());
    Ok(events)
}

fn split(cfg: &RunConfig) -> Result<SplitCorpus> {
    Ok(temporal_split(&load(cfg)?, cfg.split_fraction)?)
}

fn cache(cfg: &RunConfig) -> MatrixCache {
    MatrixCache::new(cfg.use_cache.then(|| cfg.cache_dir()))
}

fn engine(cfg: &RunConfig, train: &[RatingEvent]) -> Result<Engine> {
    cache(cfg).engine(train, cfg.eval.scheme, cfg.eval.preference_threshold)
}

fn distinct<'a>(events: &'a [RatingEvent], f: impl Fn(&'a RatingEvent) -> &'a str) -> usize {
    events.iter().map(f).collect::<BTreeSet<_>>().len()
}

pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let corpus = split(cfg)?;
    let all: Vec<RatingEvent> = corpus.train.iter().chain(&corpus.test).cloned().collect();
    let summary = serde_json::json!({
        "events": all.len(),
        "users": distinct(&all, |e| &e.user_id),
        "books": distinct(&all, |e| &e.book_id),
        "authors": distinct(&all, |e| &e.author_id),
        "train": corpus.train.len(),
        "test": corpus.test.len(),
        "split_fraction": corpus.split_fraction,
    });
    for key in ["events", "users", "books", "authors", "train", "test"] {
        println!("{key:<8} {}", summary[key]);
    }
    write_atomic(&cfg.out_dir.join("corpus.csv"), |w| Ok(write_ratings_csv(&all, w)?))?;
    write_atomic(&cfg.out_dir.join("summary.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary).map_err(Failure::internal)?;
        Ok(writeln!(w)?)
    })?;
    Ok(())
}

pub fn synth(cfg: &RunConfig, output: Option<PathBuf>) -> Result<()> {
    let seed = cfg.seed.ok_or_else(|| Failure::input("synth needs --seed"))?;
    let params = SynthParams {
        n_users: cfg.synth.users,
        n_authors: cfg.synth.authors,
        books_per_author: cfg.synth.books_per_author,
        affinity: cfg.synth.affinity,
        seed,
    };
    let events = synth_generate(&params)?;
    let path = output.unwrap_or_else(|| cfg.out_dir.join("synth.csv"));
    write_atomic(&path, |w| Ok(write_ratings_csv(&events, w)?))?;
    println!(
        "wrote {} events ({} users, {} books, {} authors) to {}",
        events.len(),
        distinct(&events, |e| &e.user_id),
        distinct(&events, |e| &e.book_id),
        distinct(&events, |e| &e.author_id),
        path.display()
    );
    Ok(())
}

/// Trains on the whole ratings file and prints or writes the user's list.
pub fn recommend(cfg: &RunConfig, user_id: &str, output: Option<&Path>) -> Result<()> {
    let events = temporal_order(&load(cfg)?);
    let engine = engine(cfg, &events)?;
    let user = engine.user_index(user_id)?;
    let e = &cfg.eval;
    let list = engine.recommend(user, &e.fusion, &e.agg_author, &e.agg_book)?;
    let catalog = engine.catalog();

    let render = |w: &mut dyn Write| -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Failure::internal(e);
        wtr.write_record(["rank", "book_id", "author_id", "score"]).map_err(csv_err)?;
        for (rank, &(b, score)) in list.entries.iter().enumerate() {
            wtr.write_record([
                (rank + 1).to_string().as_str(),
                catalog.books().id(b),
                catalog.authors().id(catalog.author_of(b)),
                &score.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    };
    match output {
        Some(path) => write_atomic(path, render),
        None => render(&mut std::io::stdout().lock()),
    }
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let corpus = split(cfg)?;
    let engine = engine(cfg, &corpus.train)?;
    let report = evaluate_with_engine(&engine, &corpus.test, &cfg.eval)?;
    let path = cfg.out_dir.join("report.json");
    write_atomic(&path, |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(Failure::internal)?;
        Ok(writeln!(w)?)
    })?;
    println!(
        "MRR {} over {} users ({} cold-start skipped); report in {}",
        report.mrr,
        report.n_users_evaluated,
        report.skipped_cold_start,
        path.display()
    );
    Ok(())
}

fn show(mrr: &std::result::Result<f64, String>) -> String {
    match mrr {
        Ok(v) => v.to_string(),
        Err(e) => format!("error: {e}"),
    }
}

pub fn sweep_similarity(cfg: &RunConfig) -> Result<()> {
    let corpus = split(cfg)?;
    let cache = cache(cfg);
    let rows = sweep_similarity_with(&corpus.test, &cfg.eval, |scheme| {
        cache
            .engine(&corpus.train, scheme, cfg.eval.preference_threshold)
            .map_err(|e| e.message().to_owned())
    });
    let path = cfg.out_dir.join("sweep_similarity.csv");
    write_atomic(&path, |w| Ok(write_similarity_csv(&rows, w)?))?;
    for kind in [ItemKind::Book, ItemKind::Author] {
        match best_similarity(&rows, kind) {
            Some(r) => println!(
                "best {}: {} {} MRR {}",
                kind.name(),
                r.scheme.name(),
                r.aggregation.name(),
                show(&r.mrr)
            ),
            None => println!("best {}: none (every cell failed)", kind.name()),
        }
    }
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

/// `a..b` (inclusive) or a comma-separated list.
pub fn parse_limits(spec: &str) -> Result<Vec<usize>> {
    let bad = || Failure::input(format!("--limits: expected a..b or a,b,c, got {spec:?}"));
    let limits: Vec<usize> = match spec.split_once("..") {
        Some((a, b)) => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            (a..=b).collect()
        }
        None => spec
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?,
    };
    if limits.is_empty() || limits.contains(&0) {
        return Err(bad());
    }
    Ok(limits)
}

pub fn sweep_limit(cfg: &RunConfig, limits: &[usize]) -> Result<()> {
    let corpus = split(cfg)?;
    let engine = engine(cfg, &corpus.train)?;
    let rows = sweep_book_limit_with_engine(&engine, &corpus.test, &cfg.eval, limits);
    let path = cfg.out_dir.join("sweep_limit.csv");
    write_atomic(&path, |w| Ok(write_limit_csv(&rows, w)?))?;
    match best_limit(&rows) {
        Some(r) => println!(
            "best limit: {} ({}) MRR {}",
            r.limit,
            r.aggregation.name(),
            show(&r.mrr)
        ),
        None => println!("best limit: none (every cell failed)"),
    }
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

pub fn sweep_alpha(cfg: &RunConfig, steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Failure::input("--steps must be at least 1"));
    }
    let corpus = split(cfg)?;
    let engine = engine(cfg, &corpus.train)?;
    let rows = sweep_alpha_with_engine(&engine, &corpus.test, &cfg.eval, &alpha_grid(steps));
    let path = cfg.out_dir.join("sweep_alpha.csv");
    write_atomic(&path, |w| Ok(write_alpha_csv(&rows, w)?))?;
    match best_alpha(&rows) {
        Some(r) => println!(
            "best alpha: {} ({} author, {} book) MRR {}",
            r.alpha,
            r.agg_author.name(),
            r.agg_book.name(),
            show(&r.mrr)
        ),
        None => println!("best alpha: none (every cell failed)"),
    }
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}
