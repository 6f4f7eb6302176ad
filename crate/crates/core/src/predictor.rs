//! Book and author rank vectors for one active user.
//!
//! The similarity columns of the user's favorite items are merged either by
//! reciprocal rank fusion (only ranks matter) or by a rating-weighted sum of
//! the columns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Registry, UserProfile};
use crate::similarity::{ItemKind, SimilarityMatrix, SparseVec};

/// Constant added to every rank in reciprocal rank fusion.
pub const DEFAULT_RRF_K: f64 = 60.0;

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("item {0} is not in the similarity matrix")]
    UnknownItem(usize),
    #[error("profile has no weight for seed item {0}")]
    MissingWeight(usize),
    #[error("expected a {expected} matrix, got {found}")]
    KindMismatch { expected: ItemKind, found: ItemKind },
    #[error("rrf_k must be positive and finite, got {0}")]
    InvalidK(f64),
}

pub type Result<T> = std::result::Result<T, PredictError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Rrf,
    Cfpa,
}

impl Aggregation {
    pub const ALL: [Aggregation; 2] = [Aggregation::Rrf, Aggregation::Cfpa];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rrf => "rrf",
            Self::Cfpa => "cfpa",
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rrf" => Ok(Self::Rrf),
            "cfpa" => Ok(Self::Cfpa),
            _ => Err(format!("unknown aggregation {s:?} (expected rrf or cfpa)")),
        }
    }
}

/// Weight given to a seed author's column under CFPA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorWeighting {
    /// The user's mean rating over the author's books.
    #[default]
    AverageRating,
    /// How many of the author's books the user prefers.
    PreferredCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationSpec {
    pub function: Aggregation,
    pub rrf_k: f64,
    #[serde(default)]
    pub author_weight: AuthorWeighting,
}

impl AggregationSpec {
    pub fn new(function: Aggregation) -> Self {
        Self {
            function,
            rrf_k: DEFAULT_RRF_K,
            author_weight: AuthorWeighting::default(),
        }
    }

    pub fn rrf() -> Self {
        Self::new(Aggregation::Rrf)
    }

    pub fn cfpa() -> Self {
        Self::new(Aggregation::Cfpa)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rrf_k > 0.0 && self.rrf_k.is_finite() {
            Ok(())
        } else {
            Err(PredictError::InvalidK(self.rrf_k))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Icfb,
    Icfa,
    Expanded,
    Fused,
}

/// Item → score map. Absent items score zero; zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    pub kind: ItemKind,
    pub provenance: Provenance,
    scores: BTreeMap<usize, f64>,
}

impl RankVector {
    pub fn new(kind: ItemKind, provenance: Provenance) -> Self {
        Self {
            kind,
            provenance,
            scores: BTreeMap::new(),
        }
    }

    pub fn from_scores(
        kind: ItemKind,
        provenance: Provenance,
        scores: impl IntoIterator<Item = (usize, f64)>,
    ) -> Self {
        let scores = scores.into_iter().filter(|&(_, s)| s != 0.0).collect();
        Self {
            kind,
            provenance,
            scores,
        }
    }

    pub fn get(&self, item: usize) -> f64 {
        self.scores.get(&item).copied().unwrap_or(0.0)
    }

    /// Nonzero entries in ascending item order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.scores.iter().map(|(&i, &s)| (i, s))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Entries sorted by score descending, ties by ascending item index.
    pub fn ranked(&self) -> Vec<(usize, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// CSV `item_id,score` in ranked order.
    pub fn write_csv<W: Write>(&self, ids: &Registry, mut w: W) -> std::io::Result<()> {
        writeln!(w, "item_id,score")?;
        for (i, s) in self.ranked() {
            writeln!(w, "{},{}", ids.id(i), s)?;
        }
        w.flush()
    }
}

fn default_provenance(kind: ItemKind) -> Provenance {
    match kind {
        ItemKind::Book => Provenance::Icfb,
        ItemKind::Author => Provenance::Icfa,
    }
}

/// One column per seed, ascending seed order. The diagonal is not stored so
/// a seed never appears in its own column.
pub fn select_columns(
    sim: &SimilarityMatrix,
    seeds: &BTreeSet<usize>,
) -> Result<Vec<(usize, SparseVec)>> {
    seeds
        .iter()
        .map(|&s| {
            if s >= sim.n_items() {
                Err(PredictError::UnknownItem(s))
            } else {
                Ok((s, sim.row_vec(s)))
            }
        })
        .collect()
}

/// Reciprocal rank fusion: each column ranks its strictly positive entries
/// 1, 2, ... (score descending, ties by item index) and every item collects
/// `1 / (k + rank)` from each column that retrieves it.
pub fn rrf_aggregate<'a>(
    kind: ItemKind,
    columns: impl IntoIterator<Item = &'a SparseVec>,
    k: f64,
) -> Result<RankVector> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(PredictError::InvalidK(k));
    }
    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    for col in columns {
        let mut retrieved: Vec<(usize, f64)> =
            col.iter().copied().filter(|&(_, s)| s > 0.0).collect();
        retrieved.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (rank0, (item, _)) in retrieved.into_iter().enumerate() {
            *scores.entry(item).or_insert(0.0) += 1.0 / (k + (rank0 + 1) as f64);
        }
    }
    Ok(RankVector::from_scores(
        kind,
        default_provenance(kind),
        scores,
    ))
}

fn seed_weight(
    profile: &UserProfile,
    kind: ItemKind,
    seed: usize,
    weighting: AuthorWeighting,
) -> Result<f64> {
    let w = match (kind, weighting) {
        (ItemKind::Book, _) => profile.book_ratings.get(&seed).map(|&r| f64::from(r)),
        (ItemKind::Author, AuthorWeighting::AverageRating) => {
            profile.author_avg_rating.get(&seed).copied()
        }
        (ItemKind::Author, AuthorWeighting::PreferredCount) => {
            profile.author_pref_count.get(&seed).map(|&c| f64::from(c))
        }
    };
    w.ok_or(PredictError::MissingWeight(seed))
}

/// Rating-weighted sum of the seed columns. Book seeds weigh by the user's
/// rating of the book, author seeds by `weighting`.
pub fn cfpa_aggregate(
    kind: ItemKind,
    columns: &[(usize, SparseVec)],
    profile: &UserProfile,
    weighting: AuthorWeighting,
) -> Result<RankVector> {
    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    for (seed, col) in columns {
        let w = seed_weight(profile, kind, *seed, weighting)?;
        for &(item, s) in col {
            *scores.entry(item).or_insert(0.0) += w * s;
        }
    }
    Ok(RankVector::from_scores(
        kind,
        default_provenance(kind),
        scores,
    ))
}

fn predict(
    sim: &SimilarityMatrix,
    expected: ItemKind,
    seeds: &BTreeSet<usize>,
    profile: &UserProfile,
    agg: &AggregationSpec,
) -> Result<RankVector> {
    if sim.kind() != expected {
        return Err(PredictError::KindMismatch {
            expected,
            found: sim.kind(),
        });
    }
    let columns = select_columns(sim, seeds)?;
    match agg.function {
        Aggregation::Rrf => rrf_aggregate(expected, columns.iter().map(|(_, c)| c), agg.rrf_k),
        Aggregation::Cfpa => cfpa_aggregate(expected, &columns, profile, agg.author_weight),
    }
}

/// Book rank vector seeded by the user's preferred books. Books the user
/// already rated keep their score here.
pub fn predict_books(
    sim: &SimilarityMatrix,
    profile: &UserProfile,
    agg: &AggregationSpec,
) -> Result<RankVector> {
    predict(sim, ItemKind::Book, &profile.preferred_books, profile, agg)
}

/// Author rank vector seeded by every author with a preferred book.
pub fn predict_authors(
    sim: &SimilarityMatrix,
    profile: &UserProfile,
    agg: &AggregationSpec,
) -> Result<RankVector> {
    predict(
        sim,
        ItemKind::Author,
        &profile.favorite_authors(),
        profile,
        agg,
    )
}
