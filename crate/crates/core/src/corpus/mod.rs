//! Rating events, catalogs, the temporal split and per-user profiles.

mod io;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use io::{load_ratings, write_ratings_csv, RatingsFormat};
pub use synth::{liked_authors, synth_generate, SynthParams};

/// Default minimum rating for a book to count as preferred.
pub const DEFAULT_PREFERENCE_THRESHOLD: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("ratings file not found: {0}")]
    MissingFile(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },
    #[error("rating {value} at line {line} is outside 1..=5")]
    RatingOutOfRange { line: u64, value: i64 },
    #[error("EmptyInput: no rating events")]
    EmptyInput,
    #[error("split fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("unknown user index {0}")]
    UnknownUser(usize),
    #[error("event references {0} which is not in the catalog")]
    CatalogMismatch(String),
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// One (user, book, rating, date) observation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatingEvent {
    pub user_id: String,
    pub book_id: String,
    pub author_id: String,
    pub rating: u8,
    pub review_date: NaiveDate,
}

impl RatingEvent {
    fn sort_key(&self) -> (NaiveDate, &str, &str, &str, u8) {
        (
            self.review_date,
            &self.user_id,
            &self.book_id,
            &self.author_id,
            self.rating,
        )
    }
}

/// Dense string-id to index registry. Indices follow first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Registry {
    fn intern(&mut self, id: &str) -> usize {
        if let Some(&idx) = self.index.get(id) {
            return idx;
        }
        let idx = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), idx);
        idx
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Indexed users, books and authors of a training set, plus the book to
/// author mapping and training popularity counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    users: Registry,
    books: Registry,
    authors: Registry,
    book_author: Vec<usize>,
    popularity: Vec<u32>,
    /// Books of each author, most popular first, ties by ascending index.
    author_books: Vec<Vec<usize>>,
    warnings: Vec<String>,
}

impl Catalog {
    /// Registries cover exactly the entities in `train`. When a book shows
    /// up under two author ids the first one seen is kept.
    pub fn build(train: &[RatingEvent]) -> Result<Self> {
        if train.is_empty() {
            return Err(CorpusError::EmptyInput);
        }
        let mut users = Registry::default();
        let mut books = Registry::default();
        let mut authors = Registry::default();
        let mut book_author = Vec::new();
        let mut popularity: Vec<u32> = Vec::new();
        let mut warnings = Vec::new();

        for ev in train {
            users.intern(&ev.user_id);
            let b = books.intern(&ev.book_id);
            if b == book_author.len() {
                book_author.push(authors.intern(&ev.author_id));
                popularity.push(0);
            } else {
                let kept = authors.id(book_author[b]);
                if kept != ev.author_id {
                    let msg = format!(
                        "book {} listed under author {} and {}; keeping {}",
                        ev.book_id, kept, ev.author_id, kept
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
            popularity[b] += 1;
        }

        let mut author_books = vec![Vec::new(); authors.len()];
        for (b, &a) in book_author.iter().enumerate() {
            author_books[a].push(b);
        }
        for list in &mut author_books {
            list.sort_by(|&x, &y| popularity[y].cmp(&popularity[x]).then(x.cmp(&y)));
        }

        Ok(Self {
            users,
            books,
            authors,
            book_author,
            popularity,
            author_books,
            warnings,
        })
    }

    pub fn users(&self) -> &Registry {
        &self.users
    }

    pub fn books(&self) -> &Registry {
        &self.books
    }

    pub fn authors(&self) -> &Registry {
        &self.authors
    }

    pub fn author_of(&self, book: usize) -> usize {
        self.book_author[book]
    }

    pub fn popularity(&self, book: usize) -> u32 {
        self.popularity[book]
    }

    pub fn max_popularity(&self) -> u32 {
        self.popularity.iter().copied().max().unwrap_or(0)
    }

    /// Books written by `author`, most popular first.
    pub fn books_by_author(&self, author: usize) -> &[usize] {
        &self.author_books[author]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Result of the global temporal cut.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCorpus {
    pub train: Vec<RatingEvent>,
    pub test: Vec<RatingEvent>,
    pub split_fraction: f64,
}

/// Sorts all events by review date and sends the first `⌈fraction·N⌉` to
/// train. Equal dates are ordered by user id, book id, author id, rating.
pub fn temporal_split(events: &[RatingEvent], fraction: f64) -> Result<SplitCorpus> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    if events.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut sorted = temporal_order(events);
    let n_train = train_size(sorted.len(), fraction);
    let test = sorted.split_off(n_train);
    Ok(SplitCorpus {
        train: sorted,
        test,
        split_fraction: fraction,
    })
}

/// Events sorted by review date, ties by user id, book id, author id and
/// rating, so the order does not depend on the input order.
pub fn temporal_order(events: &[RatingEvent]) -> Vec<RatingEvent> {
    let mut sorted = events.to_vec();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    sorted
}

/// `⌈fraction·n⌉`, with products that land within float noise of an integer
/// treated as that integer (0.7·10 must give 7, not 8).
pub fn train_size(n: usize, fraction: f64) -> usize {
    let scaled = fraction * n as f64;
    let nearest = scaled.round();
    let count = if (scaled - nearest).abs() < 1e-9 {
        nearest
    } else {
        scaled.ceil()
    };
    (count as usize).min(n)
}

/// What one user liked in the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user: usize,
    pub preferred_books: BTreeSet<usize>,
    pub book_ratings: BTreeMap<usize, u8>,
    pub author_avg_rating: BTreeMap<usize, f64>,
    pub author_pref_count: BTreeMap<usize, u32>,
}

impl UserProfile {
    /// Authors with at least one preferred book.
    pub fn favorite_authors(&self) -> BTreeSet<usize> {
        self.author_pref_count
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&a, _)| a)
            .collect()
    }

    pub fn has_rated(&self, book: usize) -> bool {
        self.book_ratings.contains_key(&book)
    }
}

type LatestRatings = BTreeMap<usize, (NaiveDate, u8)>;

/// Keeps the latest rating per book; on equal dates the higher rating wins
/// so the outcome does not depend on event order.
fn record_latest(ratings: &mut LatestRatings, book: usize, date: NaiveDate, rating: u8) {
    ratings
        .entry(book)
        .and_modify(|cur| {
            if (date, rating) > *cur {
                *cur = (date, rating);
            }
        })
        .or_insert((date, rating));
}

fn profile_from_latest(
    user: usize,
    latest: &LatestRatings,
    catalog: &Catalog,
    threshold: u8,
) -> UserProfile {
    let mut preferred_books = BTreeSet::new();
    let mut book_ratings = BTreeMap::new();
    let mut author_sums: BTreeMap<usize, (u32, u32)> = BTreeMap::new();
    let mut author_pref_count = BTreeMap::new();

    for (&book, &(_, rating)) in latest {
        book_ratings.insert(book, rating);
        let author = catalog.author_of(book);
        let sum = author_sums.entry(author).or_insert((0, 0));
        sum.0 += u32::from(rating);
        sum.1 += 1;
        if rating >= threshold {
            preferred_books.insert(book);
            *author_pref_count.entry(author).or_insert(0) += 1;
        }
    }

    let author_avg_rating = author_sums
        .into_iter()
        .map(|(a, (sum, n))| (a, f64::from(sum) / f64::from(n)))
        .collect();

    UserProfile {
        user,
        preferred_books,
        book_ratings,
        author_avg_rating,
        author_pref_count,
    }
}

fn lookup(catalog: &Catalog, ev: &RatingEvent) -> Result<(usize, usize)> {
    let user = catalog
        .users()
        .get(&ev.user_id)
        .ok_or_else(|| CorpusError::CatalogMismatch(format!("user {}", ev.user_id)))?;
    let book = catalog
        .books()
        .get(&ev.book_id)
        .ok_or_else(|| CorpusError::CatalogMismatch(format!("book {}", ev.book_id)))?;
    Ok((user, book))
}

/// Builds the profile of a single user from the training events.
pub fn build_profile(
    train: &[RatingEvent],
    catalog: &Catalog,
    user: usize,
    preference_threshold: u8,
) -> Result<UserProfile> {
    if user >= catalog.users().len() {
        return Err(CorpusError::UnknownUser(user));
    }
    let user_id = catalog.users().id(user);
    let mut latest = LatestRatings::new();
    for ev in train.iter().filter(|ev| ev.user_id == user_id) {
        let (_, book) = lookup(catalog, ev)?;
        record_latest(&mut latest, book, ev.review_date, ev.rating);
    }
    Ok(profile_from_latest(
        user,
        &latest,
        catalog,
        preference_threshold,
    ))
}

/// Profiles for every catalog user, indexed by user index.
pub fn build_profiles(
    train: &[RatingEvent],
    catalog: &Catalog,
    preference_threshold: u8,
) -> Result<Vec<UserProfile>> {
    let mut latest = vec![LatestRatings::new(); catalog.users().len()];
    for ev in train {
        let (user, book) = lookup(catalog, ev)?;
        record_latest(&mut latest[user], book, ev.review_date, ev.rating);
    }
    Ok(latest
        .iter()
        .enumerate()
        .map(|(u, l)| profile_from_latest(u, l, catalog, preference_threshold))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::ev;

    #[test]
    fn split_ten_events_nine_one() {
        let events: Vec<_> = (0..10)
            .rev()
            .map(|d| ev(&format!("u{d}"), "b", "a", 4, d))
            .collect();
        let split = temporal_split(&events, 0.9).unwrap();
        assert_eq!(split.train.len(), 9);
        assert_eq!(split.test.len(), 1);
        assert_eq!(split.test[0].user_id, "u9");
    }

    #[test]
    fn split_same_date_uses_tiebreak() {
        let events: Vec<_> = (0..10)
            .rev()
            .map(|i| ev(&format!("u{i}"), &format!("b{i}"), "a", 3, 0))
            .collect();
        let split = temporal_split(&events, 0.9).unwrap();
        assert_eq!(split.train.len(), 9);
        assert_eq!(split.test[0].user_id, "u9");
        assert_eq!(split.train[0].user_id, "u0");
    }

    #[test]
    fn split_litrec_scale_counts() {
        assert_eq!(train_size(38_591, 0.9), 34_732);
        assert_eq!(38_591 - train_size(38_591, 0.9), 3_859);
        assert_eq!(train_size(10, 0.7), 7);
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(
            temporal_split(&[], 0.9),
            Err(CorpusError::EmptyInput)
        ));
        let one = [ev("u", "b", "a", 4, 0)];
        assert!(matches!(
            temporal_split(&one, 1.0),
            Err(CorpusError::InvalidFraction(_))
        ));
        assert!(matches!(
            temporal_split(&one, 0.0),
            Err(CorpusError::InvalidFraction(_))
        ));
    }

    #[test]
    fn catalog_counts_popularity() {
        let train = vec![
            ev("u1", "b1", "a", 5, 0),
            ev("u2", "b1", "a", 4, 1),
            ev("u3", "b1", "a", 3, 2),
            ev("u1", "b2", "a", 2, 3),
        ];
        let cat = Catalog::build(&train).unwrap();
        assert_eq!(cat.authors().len(), 1);
        assert_eq!(cat.popularity(0), 3);
        assert_eq!(cat.popularity(1), 1);
        assert_eq!(cat.books_by_author(0), &[0, 1]);
        assert_eq!(cat.max_popularity(), 3);
    }

    #[test]
    fn catalog_conflicting_author_first_seen_wins() {
        let train = vec![ev("u1", "b1", "a1", 5, 0), ev("u2", "b1", "a2", 4, 1)];
        let cat = Catalog::build(&train).unwrap();
        assert_eq!(cat.authors().id(cat.author_of(0)), "a1");
        assert_eq!(cat.warnings().len(), 1);
        assert!(cat.warnings()[0].contains("b1"));
    }

    #[test]
    fn catalog_empty_input() {
        assert!(matches!(Catalog::build(&[]), Err(CorpusError::EmptyInput)));
    }

    #[test]
    fn profile_hand_computed() {
        let train = vec![ev("u", "b1", "a", 5, 0), ev("u", "b2", "a", 3, 1)];
        let cat = Catalog::build(&train).unwrap();
        let p = build_profile(&train, &cat, 0, 4).unwrap();
        assert_eq!(p.preferred_books, BTreeSet::from([0]));
        assert_eq!(p.author_avg_rating[&0], 4.0);
        assert_eq!(p.author_pref_count[&0], 1);
    }

    #[test]
    fn profile_without_preferences_is_valid() {
        let train = vec![ev("u", "b1", "a", 2, 0), ev("u", "b2", "a", 3, 1)];
        let cat = Catalog::build(&train).unwrap();
        let p = build_profile(&train, &cat, 0, 4).unwrap();
        assert!(p.preferred_books.is_empty());
        assert!(p.favorite_authors().is_empty());
        assert_eq!(p.book_ratings.len(), 2);
    }

    #[test]
    fn profile_duplicate_rating_latest_wins() {
        let train = vec![ev("u", "b1", "a", 3, 0), ev("u", "b1", "a", 5, 7)];
        let cat = Catalog::build(&train).unwrap();
        let p = build_profile(&train, &cat, 0, 4).unwrap();
        assert_eq!(p.book_ratings[&0], 5);
        // reversed input order, same answer
        let rev: Vec<_> = train.iter().rev().cloned().collect();
        let p2 = build_profile(&rev, &cat, 0, 4).unwrap();
        assert_eq!(p, p2);
    }

    #[test]
    fn profile_unknown_user() {
        let train = vec![ev("u", "b1", "a", 3, 0)];
        let cat = Catalog::build(&train).unwrap();
        assert!(matches!(
            build_profile(&train, &cat, 5, 4),
            Err(CorpusError::UnknownUser(5))
        ));
    }

    #[test]
    fn build_profiles_matches_single() {
        let train = vec![
            ev("u1", "b1", "a1", 5, 0),
            ev("u2", "b2", "a1", 4, 1),
            ev("u1", "b3", "a2", 1, 2),
            ev("u2", "b1", "a1", 2, 3),
        ];
        let cat = Catalog::build(&train).unwrap();
        let all = build_profiles(&train, &cat, 4).unwrap();
        for (u, p) in all.iter().enumerate() {
            assert_eq!(p, &build_profile(&train, &cat, u, 4).unwrap());
        }
    }
}
