//! Seeded generator of rating corpora with planted author affinity.
//!
//! Authors are split into taste groups of [`GROUP_SIZE`]. Every user picks
//! one group and likes up to [`LIKED_AUTHORS`] authors from it. Each rating
//! goes to a liked author's book with probability [`LIKED_PICK`], otherwise
//! to a book of a uniformly drawn author; within an author, books are drawn
//! with weight `1/(rank+1)` so popularity is skewed. Ratings for liked
//! authors are 4–5 with probability `affinity`, ratings for other authors
//! are 1–3 with probability `affinity`, and uniform on 1–5 otherwise.
//!
//! Events are emitted in rounds (one rating per user per round, users
//! shuffled inside a round) with one day between consecutive events, so a
//! global temporal cut leaves most users with both train and test history.

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, RatingEvent, Result};

pub const GROUP_SIZE: usize = 4;
pub const LIKED_AUTHORS: usize = 4;
pub const RATINGS_PER_USER: usize = 8;
pub const LIKED_PICK: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_users: usize,
    pub n_authors: usize,
    pub books_per_author: usize,
    pub affinity: f64,
    pub seed: u64,
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(CorpusError::InvalidParameter(what.to_owned()));
        if self.n_users == 0 {
            return bad("n_users must be at least 1");
        }
        if self.n_authors == 0 {
            return bad("n_authors must be at least 1");
        }
        if self.books_per_author == 0 {
            return bad("books_per_author must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.affinity) {
            return bad("affinity must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Ids of liked authors for each user. Exposed so tests can check the
/// planted structure against the generated ratings.
pub fn liked_authors(params: &SynthParams) -> Result<Vec<Vec<usize>>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    Ok(assign_likes(params, &mut rng))
}

fn assign_likes(params: &SynthParams, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n_groups = params.n_authors.div_ceil(GROUP_SIZE);
    (0..params.n_users)
        .map(|_| {
            let g = rng.random_range(0..n_groups);
            let mut members: Vec<usize> =
                (g * GROUP_SIZE..((g + 1) * GROUP_SIZE).min(params.n_authors)).collect();
            members.shuffle(rng);
            members.truncate(LIKED_AUTHORS);
            members.sort_unstable();
            members
        })
        .collect()
}

fn pad(prefix: char, i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("{prefix}{i:0width$}")
}

pub fn synth_generate(params: &SynthParams) -> Result<Vec<RatingEvent>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let likes = assign_likes(params, &mut rng);

    let bpa = params.books_per_author;
    let n_books = params.n_authors * bpa;
    let per_user = RATINGS_PER_USER.min(n_books);
    let n_events = params.n_users * per_user;

    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    if start.checked_add_days(Days::new(n_events as u64)).is_none() {
        return Err(CorpusError::InvalidParameter(
            "too many events for the date range".into(),
        ));
    }

    // cumulative within-author weights 1, 1/2, 1/3, ...
    let cumulative: Vec<f64> = (0..bpa)
        .scan(0.0, |acc, j| {
            *acc += 1.0 / (j as f64 + 1.0);
            Some(*acc)
        })
        .collect();
    let total_weight = cumulative[bpa - 1];

    let mut rated = vec![vec![false; n_books]; params.n_users];
    let mut order: Vec<usize> = (0..params.n_users).collect();
    let mut events = Vec::with_capacity(n_events);

    for _round in 0..per_user {
        order.shuffle(&mut rng);
        for &u in &order {
            let liked = &likes[u];
            let mut book = None;
            for _attempt in 0..64 {
                let author = if !liked.is_empty() && rng.random_bool(LIKED_PICK) {
                    liked[rng.random_range(0..liked.len())]
                } else {
                    rng.random_range(0..params.n_authors)
                };
                let x = rng.random::<f64>() * total_weight;
                let j = cumulative.partition_point(|&c| c <= x).min(bpa - 1);
                let b = author * bpa + j;
                if !rated[u][b] {
                    book = Some(b);
                    break;
                }
            }
            let b = match book {
                Some(b) => b,
                None => rated[u]
                    .iter()
                    .position(|&r| !r)
                    .expect("per_user never exceeds the number of books"),
            };
            rated[u][b] = true;

            let author = b / bpa;
            let is_liked = liked.binary_search(&author).is_ok();
            let rating = if rng.random_bool(params.affinity) {
                if is_liked {
                    rng.random_range(4..=5)
                } else {
                    rng.random_range(1..=3)
                }
            } else {
                rng.random_range(1..=5)
            };

            let k = events.len() as u64;
            events.push(RatingEvent {
                user_id: pad('u', u, params.n_users),
                book_id: pad('b', b, n_books),
                author_id: pad('a', author, params.n_authors),
                rating,
                review_date: start + Days::new(k),
            });
        }
    }
    Ok(events)
}
