//! Mean reciprocal rank over the temporal test split, plus the similarity,
//! book-limit and alpha sweeps.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Catalog, RatingEvent, SplitCorpus, DEFAULT_PREFERENCE_THRESHOLD};
use crate::hybrid::{Engine, FusionSpec, HybridError, RecommendationList};
use crate::predictor::{Aggregation, AggregationSpec};
use crate::similarity::{ItemKind, Scheme};

pub const DEFAULT_RELEVANCE_THRESHOLD: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("no user has both training history and test events")]
    NoEvaluableUsers,
    #[error("threshold {0} is outside 1..=5")]
    InvalidThreshold(u8),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub scheme: Scheme,
    pub agg_author: AggregationSpec,
    pub agg_book: AggregationSpec,
    pub fusion: FusionSpec,
    pub preference_threshold: u8,
    /// Minimum test rating for a recommended book to count as a hit.
    pub relevance_threshold: u8,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Cooc,
            agg_author: AggregationSpec::cfpa(),
            agg_book: AggregationSpec::rrf(),
            fusion: FusionSpec::default(),
            preference_threshold: DEFAULT_PREFERENCE_THRESHOLD,
            relevance_threshold: DEFAULT_RELEVANCE_THRESHOLD,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        for t in [self.preference_threshold, self.relevance_threshold] {
            if !(1..=5).contains(&t) {
                return Err(EvalError::InvalidThreshold(t));
            }
        }
        self.fusion.validate()?;
        self.agg_author.validate().map_err(HybridError::from)?;
        self.agg_book.validate().map_err(HybridError::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mrr: f64,
    pub n_users_evaluated: usize,
    pub skipped_cold_start: usize,
    pub config: Option<EvalConfig>,
    /// Reciprocal rank per evaluated user id; 0 when the list has no hit.
    #[serde(skip)]
    pub per_user: BTreeMap<String, f64>,
}

/// Relevant test books per user id. Repeated (user, book) test ratings
/// collapse to the latest one, as in training.
struct TestIndex<'a> {
    relevant: HashMap<&'a str, HashSet<&'a str>>,
    users: Vec<&'a str>,
}

impl<'a> TestIndex<'a> {
    fn new(test: &'a [RatingEvent], relevance_threshold: u8) -> Self {
        let mut latest: HashMap<(&str, &str), (NaiveDate, u8)> = HashMap::new();
        for ev in test {
            let key = (ev.user_id.as_str(), ev.book_id.as_str());
            let val = (ev.review_date, ev.rating);
            latest
                .entry(key)
                .and_modify(|cur| {
                    if val > *cur {
                        *cur = val;
                    }
                })
                .or_insert(val);
        }
        let mut relevant: HashMap<&str, HashSet<&str>> = HashMap::new();
        for ((user, book), (_, rating)) in latest {
            let set = relevant.entry(user).or_default();
            if rating >= relevance_threshold {
                set.insert(book);
            }
        }
        let mut users: Vec<&str> = relevant.keys().copied().collect();
        users.sort_unstable();
        Self { relevant, users }
    }

    fn reciprocal_rank(&self, user_id: &str, list: &RecommendationList, catalog: &Catalog) -> f64 {
        let Some(set) = self.relevant.get(user_id) else {
            return 0.0;
        };
        list.books()
            .position(|b| set.contains(catalog.books().id(b)))
            .map_or(0.0, |p| 1.0 / (p + 1) as f64)
    }
}

/// MRR of `lists` against the test events: each list scores `1/p` for the
/// first position `p` holding a relevant test book, 0 without a hit, and
/// the mean is over lists whose user has test events.
pub fn mrr(
    lists: &[RecommendationList],
    test: &[RatingEvent],
    catalog: &Catalog,
    relevance_threshold: u8,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let index = TestIndex::new(test, relevance_threshold);
    Ok(mrr_with_index(lists, &index, catalog))
}

fn mrr_with_index(lists: &[RecommendationList], index: &TestIndex, catalog: &Catalog) -> EvalReport {
    let mut per_user = BTreeMap::new();
    for list in lists {
        let user_id = catalog.users().id(list.user);
        if !index.relevant.contains_key(user_id) {
            continue;
        }
        per_user.insert(user_id.to_owned(), index.reciprocal_rank(user_id, list, catalog));
    }
    let n = per_user.len();
    let mrr = if n == 0 {
        0.0
    } else {
        per_user.values().sum::<f64>() / n as f64
    };
    EvalReport {
        mrr,
        n_users_evaluated: n,
        skipped_cold_start: 0,
        config: None,
        per_user,
    }
}

/// Splits test users into evaluable catalog indices (in user id order) and
/// a cold-start count.
fn evaluable_users(index: &TestIndex, catalog: &Catalog) -> (Vec<usize>, usize) {
    let mut users = Vec::new();
    let mut cold = 0;
    for &id in &index.users {
        match catalog.users().get(id) {
            Some(u) => users.push(u),
            None => cold += 1,
        }
    }
    // id order, the same order per-user reciprocal ranks are summed in
    (users, cold)
}

/// Trains on `corpus.train` only and scores every user with both training
/// history and test events.
pub fn evaluate(corpus: &SplitCorpus, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let engine = Engine::train(&corpus.train, config.scheme, config.preference_threshold)?;
    evaluate_with_engine(&engine, &corpus.test, config)
}

/// Same as [`evaluate`] with an already trained engine. The engine must have
/// been trained with `config.scheme` and `config.preference_threshold`.
pub fn evaluate_with_engine(
    engine: &Engine,
    test: &[RatingEvent],
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.validate()?;
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let index = TestIndex::new(test, config.relevance_threshold);
    let (users, cold) = evaluable_users(&index, engine.catalog());
    if users.is_empty() {
        return Err(EvalError::NoEvaluableUsers);
    }
    let lists = users
        .par_iter()
        .map(|&u| engine.recommend(u, &config.fusion, &config.agg_author, &config.agg_book))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut report = mrr_with_index(&lists, &index, engine.catalog());
    report.skipped_cold_start = cold;
    report.config = Some(*config);
    Ok(report)
}

fn cell(result: Result<EvalReport>) -> std::result::Result<f64, String> {
    result.map(|r| r.mrr).map_err(|e| e.to_string())
}

fn fmt_mrr(mrr: &std::result::Result<f64, String>) -> String {
    match mrr {
        Ok(v) => v.to_string(),
        Err(e) => format!("error: {e}"),
    }
}

fn best_by<T>(rows: &[T], mrr: impl Fn(&T) -> Option<f64>) -> Option<&T> {
    rows.iter().fold(None, |best: Option<&T>, row| match (best, mrr(row)) {
        (_, None) => best,
        (None, Some(_)) => Some(row),
        (Some(b), Some(v)) => {
            if v > mrr(b).unwrap_or(f64::NEG_INFINITY) {
                Some(row)
            } else {
                Some(b)
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRow {
    pub kind: ItemKind,
    pub scheme: Scheme,
    pub aggregation: Aggregation,
    pub mrr: std::result::Result<f64, String>,
}

/// Every scheme × aggregation, once with books only (α = 0) and once with
/// authors only (α = 1).
pub fn sweep_similarity(corpus: &SplitCorpus, base: &EvalConfig) -> Vec<SimilarityRow> {
    sweep_similarity_with(&corpus.test, base, |scheme| {
        Engine::train(&corpus.train, scheme, base.preference_threshold)
            .map_err(|e| EvalError::from(e).to_string())
    })
}

/// Same as [`sweep_similarity`], with engines supplied by `engine_for`
/// (for instance from a matrix cache).
pub fn sweep_similarity_with<F>(
    test: &[RatingEvent],
    base: &EvalConfig,
    engine_for: F,
) -> Vec<SimilarityRow>
where
    F: Fn(Scheme) -> std::result::Result<Engine, String> + Sync,
{
    let per_scheme: Vec<Vec<SimilarityRow>> = Scheme::ALL
        .par_iter()
        .map(|&scheme| {
            let engine = engine_for(scheme);
            let mut rows = Vec::new();
            for kind in [ItemKind::Book, ItemKind::Author] {
                for aggregation in Aggregation::ALL {
                    let mut config = EvalConfig { scheme, ..*base };
                    match kind {
                        ItemKind::Book => {
                            config.fusion.alpha = 0.0;
                            config.agg_book.function = aggregation;
                        }
                        ItemKind::Author => {
                            config.fusion.alpha = 1.0;
                            config.agg_author.function = aggregation;
                        }
                    }
                    let mrr = match &engine {
                        Ok(engine) => cell(evaluate_with_engine(engine, test, &config)),
                        Err(e) => Err(e.clone()),
                    };
                    rows.push(SimilarityRow {
                        kind,
                        scheme,
                        aggregation,
                        mrr,
                    });
                }
            }
            rows
        })
        .collect();
    let mut rows: Vec<SimilarityRow> = per_scheme.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.kind, r.scheme, r.aggregation));
    rows
}

pub fn write_similarity_csv<W: Write>(rows: &[SimilarityRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["kind", "scheme", "aggregation", "mrr"])?;
    for r in rows {
        wtr.write_record([
            r.kind.name(),
            r.scheme.name(),
            r.aggregation.name(),
            &fmt_mrr(&r.mrr),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Best cell for the given item kind.
pub fn best_similarity(rows: &[SimilarityRow], kind: ItemKind) -> Option<&SimilarityRow> {
    let filtered: Vec<&SimilarityRow> = rows.iter().filter(|r| r.kind == kind).collect();
    best_by(&filtered, |r| r.mrr.clone().ok()).copied()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub limit: usize,
    pub aggregation: Aggregation,
    pub mrr: std::result::Result<f64, String>,
}

/// Author-only pipeline (α = 1) for every book limit and author
/// aggregation.
pub fn sweep_book_limit(
    corpus: &SplitCorpus,
    base: &EvalConfig,
    limits: &[usize],
) -> Vec<LimitRow> {
    let engine = match Engine::train(&corpus.train, base.scheme, base.preference_threshold) {
        Ok(e) => e,
        Err(e) => {
            let msg = EvalError::from(e).to_string();
            return limits
                .iter()
                .flat_map(|&limit| {
                    Aggregation::ALL.map(|aggregation| LimitRow {
                        limit,
                        aggregation,
                        mrr: Err(msg.clone()),
                    })
                })
                .collect();
        }
    };
    sweep_book_limit_with_engine(&engine, &corpus.test, base, limits)
}

pub fn sweep_book_limit_with_engine(
    engine: &Engine,
    test: &[RatingEvent],
    base: &EvalConfig,
    limits: &[usize],
) -> Vec<LimitRow> {
    let cells: Vec<(usize, Aggregation)> = limits
        .iter()
        .flat_map(|&l| Aggregation::ALL.map(|a| (l, a)))
        .collect();
    cells
        .par_iter()
        .map(|&(limit, aggregation)| {
            let mut config = *base;
            config.fusion.alpha = 1.0;
            config.fusion.max_books_per_author = limit;
            config.agg_author.function = aggregation;
            LimitRow {
                limit,
                aggregation,
                mrr: cell(evaluate_with_engine(engine, test, &config)),
            }
        })
        .collect()
}

pub fn write_limit_csv<W: Write>(rows: &[LimitRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["limit", "aggregation", "mrr"])?;
    for r in rows {
        wtr.write_record([
            r.limit.to_string().as_str(),
            r.aggregation.name(),
            &fmt_mrr(&r.mrr),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn best_limit(rows: &[LimitRow]) -> Option<&LimitRow> {
    best_by(rows, |r| r.mrr.clone().ok())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    pub agg_author: Aggregation,
    pub agg_book: Aggregation,
    pub mrr: std::result::Result<f64, String>,
}

/// The `n + 1` evenly spaced points 0, 1/n, ..., 1.
pub fn alpha_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// All four author/book aggregation pairs across the α grid. Branch
/// vectors are computed once per user and pair, then fused for each α.
pub fn sweep_alpha(corpus: &SplitCorpus, base: &EvalConfig, alphas: &[f64]) -> Vec<AlphaRow> {
    match Engine::train(&corpus.train, base.scheme, base.preference_threshold) {
        Ok(engine) => sweep_alpha_with_engine(&engine, &corpus.test, base, alphas),
        Err(e) => {
            let msg = EvalError::from(e).to_string();
            alpha_cells(alphas)
                .into_iter()
                .map(|(alpha, agg_author, agg_book)| AlphaRow {
                    alpha,
                    agg_author,
                    agg_book,
                    mrr: Err(msg.clone()),
                })
                .collect()
        }
    }
}

fn alpha_cells(alphas: &[f64]) -> Vec<(f64, Aggregation, Aggregation)> {
    let mut cells = Vec::new();
    for &alpha in alphas {
        for agg_author in Aggregation::ALL {
            for agg_book in Aggregation::ALL {
                cells.push((alpha, agg_author, agg_book));
            }
        }
    }
    cells
}

pub fn sweep_alpha_with_engine(
    engine: &Engine,
    test: &[RatingEvent],
    base: &EvalConfig,
    alphas: &[f64],
) -> Vec<AlphaRow> {
    let combos: Vec<(Aggregation, Aggregation)> = Aggregation::ALL
        .iter()
        .flat_map(|&a| Aggregation::ALL.map(|b| (a, b)))
        .collect();

    let per_combo: HashMap<(Aggregation, Aggregation), Vec<std::result::Result<f64, String>>> =
        combos
            .par_iter()
            .map(|&(agg_author, agg_book)| {
                let mut config = *base;
                config.agg_author.function = agg_author;
                config.agg_book.function = agg_book;
                ((agg_author, agg_book), alpha_column(engine, test, &config, alphas))
            })
            .collect();

    alpha_cells(alphas)
        .into_iter()
        .map(|(alpha, agg_author, agg_book)| {
            let pos = alphas.iter().position(|&a| a == alpha).unwrap();
            AlphaRow {
                alpha,
                agg_author,
                agg_book,
                mrr: per_combo[&(agg_author, agg_book)][pos].clone(),
            }
        })
        .collect()
}

/// MRR for each α with one aggregation pair.
fn alpha_column(
    engine: &Engine,
    test: &[RatingEvent],
    config: &EvalConfig,
    alphas: &[f64],
) -> Vec<std::result::Result<f64, String>> {
    let run = || -> Result<Vec<f64>> {
        config.validate()?;
        if test.is_empty() {
            return Err(EvalError::EmptyTestSet);
        }
        let index = TestIndex::new(test, config.relevance_threshold);
        let (users, _) = evaluable_users(&index, engine.catalog());
        if users.is_empty() {
            return Err(EvalError::NoEvaluableUsers);
        }
        let per_user = users
            .par_iter()
            .map(|&u| -> Result<Vec<f64>> {
                let branches = engine.branches(
                    u,
                    &config.agg_author,
                    &config.agg_book,
                    config.fusion.max_books_per_author,
                )?;
                let user_id = engine.catalog().users().id(u);
                alphas
                    .iter()
                    .map(|&alpha| {
                        let spec = FusionSpec {
                            alpha,
                            ..config.fusion
                        };
                        let list = engine.finish(u, &branches, &spec)?;
                        Ok(index.reciprocal_rank(user_id, &list, engine.catalog()))
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        let n = users.len() as f64;
        Ok((0..alphas.len())
            .map(|k| per_user.iter().map(|rr| rr[k]).sum::<f64>() / n)
            .collect())
    };
    match run() {
        Ok(values) => values.into_iter().map(Ok).collect(),
        Err(e) => alphas.iter().map(|_| Err(e.to_string())).collect(),
    }
}

pub fn write_alpha_csv<W: Write>(rows: &[AlphaRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["alpha", "agg_author", "agg_book", "mrr"])?;
    for r in rows {
        wtr.write_record([
            r.alpha.to_string().as_str(),
            r.agg_author.name(),
            r.agg_book.name(),
            &fmt_mrr(&r.mrr),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn best_alpha(rows: &[AlphaRow]) -> Option<&AlphaRow> {
    best_by(rows, |r| r.mrr.clone().ok())
}
