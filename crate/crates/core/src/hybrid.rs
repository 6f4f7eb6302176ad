//! Author expansion, weighted fusion and top-n selection.
//!
//! The author rank vector is turned into a book vector (each author's most
//! popular books, capped per author, scored by author score times relative
//! popularity). Both book vectors are min-max normalized and blended as
//! `(α·author + (1−α)·book) / 2`. The top-n list drops books the user has
//! already rated.

use serde::{Deserialize, Serialize};

use crate::corpus::{build_profiles, Catalog, CorpusError, RatingEvent, UserProfile};
use crate::predictor::{
    predict_authors, predict_books, AggregationSpec, PredictError, Provenance, RankVector,
};
use crate::similarity::{similarity_from_profiles, ItemKind, Scheme, SimilarityMatrix};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_MAX_BOOKS_PER_AUTHOR: usize = 4;
pub const DEFAULT_TOP_N: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum HybridError {
    #[error("book limit per author must be at least 1")]
    InvalidLimit,
    #[error("alpha {0} is outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("top_n must be at least 1")]
    InvalidTopN,
    #[error("expected a {expected} rank vector, got {found}")]
    KindMismatch { expected: ItemKind, found: ItemKind },
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("engine parts disagree: {0}")]
    InconsistentEngine(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, HybridError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionSpec {
    /// Weight of the author branch.
    pub alpha: f64,
    pub max_books_per_author: usize,
    pub top_n: usize,
}

impl Default for FusionSpec {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            max_books_per_author: DEFAULT_MAX_BOOKS_PER_AUTHOR,
            top_n: DEFAULT_TOP_N,
        }
    }
}

impl FusionSpec {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.max_books_per_author == 0 {
            return Err(HybridError::InvalidLimit);
        }
        if self.top_n == 0 {
            return Err(HybridError::InvalidTopN);
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(HybridError::AlphaOutOfRange(alpha))
    }
}

fn check_kind(rv: &RankVector, expected: ItemKind) -> Result<()> {
    if rv.kind == expected {
        Ok(())
    } else {
        Err(HybridError::KindMismatch {
            expected,
            found: rv.kind,
        })
    }
}

/// Top-n books for one user, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationList {
    pub user: usize,
    pub entries: Vec<(usize, f64)>,
}

impl RecommendationList {
    pub fn books(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(b, _)| b)
    }
}

/// Spreads author scores over each author's `limit` most popular books.
pub fn expand_authors(
    author_rv: &RankVector,
    catalog: &Catalog,
    limit: usize,
) -> Result<RankVector> {
    check_kind(author_rv, ItemKind::Author)?;
    if limit == 0 {
        return Err(HybridError::InvalidLimit);
    }
    let max_pop = f64::from(catalog.max_popularity());
    let scores = author_rv
        .iter()
        .filter(|&(_, s)| s > 0.0)
        .flat_map(|(a, s)| {
            catalog
                .books_by_author(a)
                .iter()
                .take(limit)
                .map(move |&b| (b, s * f64::from(catalog.popularity(b)) / max_pop))
        });
    Ok(RankVector::from_scores(
        ItemKind::Book,
        Provenance::Expanded,
        scores,
    ))
}

/// Min-max normalization of the stored (nonzero) entries onto [0, 1]. A
/// constant vector maps to all ones.
pub fn normalize_rv(rv: &RankVector) -> RankVector {
    let (lo, hi) = rv
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, s)| {
            (lo.min(s), hi.max(s))
        });
    let range = hi - lo;
    let scores = rv.iter().map(|(i, s)| {
        let v = if range > 0.0 { (s - lo) / range } else { 1.0 };
        (i, v)
    });
    RankVector::from_scores(rv.kind, rv.provenance, scores)
}

/// `(α·author + (1−α)·book) / 2` per book.
pub fn wam_fuse(author_books: &RankVector, icf_books: &RankVector, alpha: f64) -> Result<RankVector> {
    check_alpha(alpha)?;
    check_kind(author_books, ItemKind::Book)?;
    check_kind(icf_books, ItemKind::Book)?;
    let items: std::collections::BTreeSet<usize> = author_books
        .iter()
        .chain(icf_books.iter())
        .map(|(i, _)| i)
        .collect();
    let scores = items.into_iter().map(|b| {
        let fused = (alpha * author_books.get(b) + (1.0 - alpha) * icf_books.get(b)) / 2.0;
        (b, fused)
    });
    Ok(RankVector::from_scores(
        ItemKind::Book,
        Provenance::Fused,
        scores,
    ))
}

/// Best `spec.top_n` positive-score books the user has not rated.
pub fn top_n(fused: &RankVector, profile: &UserProfile, spec: &FusionSpec) -> Result<RecommendationList> {
    check_kind(fused, ItemKind::Book)?;
    let entries = fused
        .ranked()
        .into_iter()
        .filter(|&(b, s)| s > 0.0 && !profile.has_rated(b))
        .take(spec.top_n)
        .collect();
    Ok(RecommendationList {
        user: profile.user,
        entries,
    })
}

/// The two normalized book vectors that feed the fusion step.
#[derive(Debug, Clone, PartialEq)]
pub struct Branches {
    pub author_books: RankVector,
    pub icf_books: RankVector,
}

/// Trained state: catalog, profiles and both similarity matrices.
#[derive(Debug, Clone)]
pub struct Engine {
    catalog: Catalog,
    profiles: Vec<UserProfile>,
    book_sim: SimilarityMatrix,
    author_sim: SimilarityMatrix,
}

impl Engine {
    /// Builds everything from training events only.
    pub fn train(train: &[RatingEvent], scheme: Scheme, preference_threshold: u8) -> Result<Self> {
        let catalog = Catalog::build(train)?;
        let profiles = build_profiles(train, &catalog, preference_threshold)?;
        let (book_sim, author_sim) = rayon::join(
            || similarity_from_profiles(&profiles, &catalog, ItemKind::Book, scheme),
            || similarity_from_profiles(&profiles, &catalog, ItemKind::Author, scheme),
        );
        Ok(Self {
            catalog,
            profiles,
            book_sim,
            author_sim,
        })
    }

    /// Reassembles an engine from previously built parts (e.g. cached
    /// matrices).
    pub fn from_parts(
        catalog: Catalog,
        profiles: Vec<UserProfile>,
        book_sim: SimilarityMatrix,
        author_sim: SimilarityMatrix,
    ) -> Result<Self> {
        let bad = |m: &str| Err(HybridError::InconsistentEngine(m.to_owned()));
        if book_sim.kind() != ItemKind::Book || author_sim.kind() != ItemKind::Author {
            return bad("matrix kinds");
        }
        if book_sim.n_items() != catalog.books().len()
            || author_sim.n_items() != catalog.authors().len()
        {
            return bad("matrix sizes do not match the catalog");
        }
        if profiles.len() != catalog.users().len() {
            return bad("profile count does not match the catalog");
        }
        Ok(Self {
            catalog,
            profiles,
            book_sim,
            author_sim,
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn profiles(&self) -> &[UserProfile] {
        &self.profiles
    }

    pub fn book_sim(&self) -> &SimilarityMatrix {
        &self.book_sim
    }

    pub fn author_sim(&self) -> &SimilarityMatrix {
        &self.author_sim
    }

    pub fn profile(&self, user: usize) -> Result<&UserProfile> {
        self.profiles
            .get(user)
            .ok_or_else(|| HybridError::UnknownUser(format!("#{user}")))
    }

    pub fn user_index(&self, user_id: &str) -> Result<usize> {
        self.catalog
            .users()
            .get(user_id)
            .ok_or_else(|| HybridError::UnknownUser(user_id.to_owned()))
    }

    /// Normalized ICF book vector and normalized expanded author vector.
    pub fn branches(
        &self,
        user: usize,
        agg_author: &AggregationSpec,
        agg_book: &AggregationSpec,
        max_books_per_author: usize,
    ) -> Result<Branches> {
        let profile = self.profile(user)?;
        let icf = predict_books(&self.book_sim, profile, agg_book)?;
        let authors = predict_authors(&self.author_sim, profile, agg_author)?;
        let expanded = expand_authors(&authors, &self.catalog, max_books_per_author)?;
        Ok(Branches {
            author_books: normalize_rv(&expanded),
            icf_books: normalize_rv(&icf),
        })
    }

    /// Fuses precomputed branches and cuts the top-n list.
    pub fn finish(&self, user: usize, branches: &Branches, spec: &FusionSpec) -> Result<RecommendationList> {
        let fused = wam_fuse(&branches.author_books, &branches.icf_books, spec.alpha)?;
        top_n(&fused, self.profile(user)?, spec)
    }

    pub fn recommend(
        &self,
        user: usize,
        spec: &FusionSpec,
        agg_author: &AggregationSpec,
        agg_book: &AggregationSpec,
    ) -> Result<RecommendationList> {
        spec.validate()?;
        agg_author.validate()?;
        agg_book.validate()?;
        let branches = self.branches(user, agg_author, agg_book, spec.max_books_per_author)?;
        self.finish(user, &branches, spec)
    }
}

/// Full pipeline for one user on a trained engine.
pub fn recommend(
    user: usize,
    engine: &Engine,
    spec: &FusionSpec,
    agg_author: &AggregationSpec,
    agg_book: &AggregationSpec,
) -> Result<RecommendationList> {
    engine.recommend(user, spec, agg_author, agg_book)
}
