//! Hybrid book recommender: item-based collaborative filtering over books
//! and over authors, author-to-book expansion, weighted fusion, and an
//! offline mean-reciprocal-rank harness.
//!
//! Pipeline for one user:
//!
//! 1. [`corpus`] loads ratings, cuts them temporally and builds the catalog
//!    and per-user profiles from the training part.
//! 2. [`similarity`] builds book×book and author×author matrices.
//! 3. [`predictor`] aggregates the matrix columns of the user's favorite
//!    books and authors into rank vectors.
//! 4. [`hybrid`] expands authors into books, fuses both book vectors and
//!    cuts the top-n list.
//! 5. [`evaluation`] scores lists against the test split.

pub mod corpus;
pub mod evaluation;
pub mod hybrid;
pub mod predictor;
pub mod similarity;

pub use corpus::{Catalog, RatingEvent, SplitCorpus, UserProfile};
pub use evaluation::{EvalConfig, EvalReport};
pub use hybrid::{Engine, FusionSpec, RecommendationList};
pub use predictor::{Aggregation, AggregationSpec, RankVector};
pub use similarity::{ItemKind, Scheme, SimilarityMatrix};

#[cfg(test)]
pub(crate) mod testutil {
    use std::collections::{BTreeMap, BTreeSet};

    use chrono::NaiveDate;

    use crate::corpus::{RatingEvent, UserProfile};

    pub fn ev(user: &str, book: &str, author: &str, rating: u8, day: u32) -> RatingEvent {
        RatingEvent {
            user_id: user.into(),
            book_id: book.into(),
            author_id: author.into(),
            rating,
            review_date: NaiveDate::from_ymd_opt(2010, 1, 1).unwrap()
                + chrono::Days::new(u64::from(day)),
        }
    }

    /// Book-only profile; every rated book counts as preferred.
    pub fn profile_with_ratings(ratings: &[(usize, u8)]) -> UserProfile {
        UserProfile {
            user: 0,
            preferred_books: ratings.iter().map(|&(b, _)| b).collect::<BTreeSet<_>>(),
            book_ratings: ratings.iter().copied().collect::<BTreeMap<_, _>>(),
            author_avg_rating: BTreeMap::new(),
            author_pref_count: BTreeMap::new(),
        }
    }
}
