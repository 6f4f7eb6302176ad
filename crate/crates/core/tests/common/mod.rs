//! Brute-force reference implementations used by the integration and
//! acceptance tests. Everything here works on dense arrays and raw rating
//! events and shares no code with the library's computation paths.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashMap, HashSet};

use bookrec_core::RatingEvent;
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const IEUC_FLOOR: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random small corpus. Few dates, so ties and repeated ratings happen.
pub fn random_events(
    rng: &mut ChaCha8Rng,
    max_users: usize,
    max_books: usize,
    max_events: usize,
) -> Vec<RatingEvent> {
    let n_users = rng.random_range(1..=max_users);
    let n_books = rng.random_range(1..=max_books);
    let n_authors = rng.random_range(1..=n_books.min(4));
    let author_of: Vec<usize> = (0..n_books).map(|_| rng.random_range(0..n_authors)).collect();
    let n_events = rng.random_range(1..=max_events);
    (0..n_events)
        .map(|_| {
            let b = rng.random_range(0..n_books);
            RatingEvent {
                user_id: format!("u{}", rng.random_range(0..n_users)),
                book_id: format!("b{b}"),
                author_id: format!("a{}", author_of[b]),
                rating: rng.random_range(1..=5),
                review_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
                    + chrono::Days::new(rng.random_range(0..6)),
            }
        })
        .collect()
}

/// Dense model of a training set keyed by string ids, indices in
/// first-appearance order.
pub struct Oracle {
    pub users: Vec<String>,
    pub books: Vec<String>,
    pub authors: Vec<String>,
    /// book index -> author index (first listing wins)
    pub book_author: Vec<usize>,
    pub popularity: Vec<u32>,
    /// latest rating per (user index, book index)
    pub ratings: HashMap<(usize, usize), u8>,
}

fn position_or_push(list: &mut Vec<String>, id: &str) -> usize {
    match list.iter().position(|x| x == id) {
        Some(p) => p,
        None => {
            list.push(id.to_owned());
            list.len() - 1
        }
    }
}

impl Oracle {
    pub fn new(train: &[RatingEvent]) -> Self {
        let mut users = Vec::new();
        let mut books = Vec::new();
        let mut authors = Vec::new();
        let mut book_author = Vec::new();
        let mut popularity = Vec::new();
        let mut latest: HashMap<(usize, usize), (NaiveDate, u8)> = HashMap::new();
        for ev in train {
            let u = position_or_push(&mut users, &ev.user_id);
            let before = books.len();
            let b = position_or_push(&mut books, &ev.book_id);
            if b == before {
                book_author.push(position_or_push(&mut authors, &ev.author_id));
                popularity.push(0);
            }
            popularity[b] += 1;
            let cand = (ev.review_date, ev.rating);
            let slot = latest.entry((u, b)).or_insert(cand);
            if cand.0 > slot.0 || (cand.0 == slot.0 && cand.1 > slot.1) {
                *slot = cand;
            }
        }
        let ratings = latest.into_iter().map(|(k, (_, r))| (k, r)).collect();
        Self {
            users,
            books,
            authors,
            book_author,
            popularity,
            ratings,
        }
    }

    pub fn n_items(&self, authors: bool) -> usize {
        if authors {
            self.authors.len()
        } else {
            self.books.len()
        }
    }

    pub fn rating(&self, u: usize, b: usize) -> Option<u8> {
        self.ratings.get(&(u, b)).copied()
    }

    pub fn author_avg(&self, u: usize, a: usize) -> Option<f64> {
        let rs: Vec<f64> = (0..self.books.len())
            .filter(|&b| self.book_author[b] == a)
            .filter_map(|b| self.rating(u, b))
            .map(f64::from)
            .collect();
        if rs.is_empty() {
            None
        } else {
            Some(rs.iter().sum::<f64>() / rs.len() as f64)
        }
    }

    pub fn prefers_book(&self, u: usize, b: usize, thr: u8) -> bool {
        self.rating(u, b).is_some_and(|r| r >= thr)
    }

    pub fn prefers_author(&self, u: usize, a: usize, thr: u8) -> bool {
        (0..self.books.len()).any(|b| self.book_author[b] == a && self.prefers_book(u, b, thr))
    }

    pub fn preferred_count(&self, u: usize, a: usize, thr: u8) -> usize {
        (0..self.books.len())
            .filter(|&b| self.book_author[b] == a && self.prefers_book(u, b, thr))
            .count()
    }

    fn prefers(&self, authors: bool, u: usize, i: usize, thr: u8) -> bool {
        if authors {
            self.prefers_author(u, i, thr)
        } else {
            self.prefers_book(u, i, thr)
        }
    }

    /// Double loop over users and ordered item pairs.
    pub fn cooc(&self, authors: bool, thr: u8) -> Vec<Vec<f64>> {
        let n = self.n_items(authors);
        let mut m = vec![vec![0.0; n]; n];
        for u in 0..self.users.len() {
            for i in 0..n {
                for j in 0..n {
                    if i != j && self.prefers(authors, u, i, thr) && self.prefers(authors, u, j, thr) {
                        m[i][j] += 1.0;
                    }
                }
            }
        }
        m
    }

    /// Item rows over all users, zeros for missing ratings.
    pub fn item_user(&self, authors: bool) -> Vec<Vec<f64>> {
        let n = self.n_items(authors);
        (0..n)
            .map(|i| {
                (0..self.users.len())
                    .map(|u| {
                        if authors {
                            self.author_avg(u, i).unwrap_or(0.0)
                        } else {
                            self.rating(u, i).map_or(0.0, f64::from)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn similarity(&self, authors: bool, scheme: &str, thr: u8) -> Vec<Vec<f64>> {
        match scheme {
            "cosine" => cosine_dense(&self.item_user(authors)),
            "ieuc" => ieuc_dense(&self.item_user(authors)),
            "cooc" => self.cooc(authors, thr),
            "cooc2-cosine" => cosine_dense(&self.cooc(authors, thr)),
            "cooc2-ieuc" => ieuc_dense(&self.cooc(authors, thr)),
            other => panic!("unknown scheme {other}"),
        }
    }

    /// Book scores from author scores: the `limit` most popular books of
    /// each positively scored author get `score · pop / max_pop`.
    pub fn expand(&self, author_scores: &[f64], limit: usize) -> Vec<f64> {
        let max_pop = f64::from(*self.popularity.iter().max().unwrap());
        let mut out = vec![0.0; self.books.len()];
        for (a, &s) in author_scores.iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            let mut own: Vec<usize> = (0..self.books.len())
                .filter(|&b| self.book_author[b] == a)
                .collect();
            own.sort_by(|&x, &y| {
                self.popularity[y]
                    .cmp(&self.popularity[x])
                    .then(x.cmp(&y))
            });
            for &b in own.iter().take(limit) {
                out[b] = s * f64::from(self.popularity[b]) / max_pop;
            }
        }
        out
    }

    /// The full hybrid pipeline for user index `u`.
    #[allow(clippy::too_many_arguments)]
    pub fn recommend(
        &self,
        u: usize,
        scheme: &str,
        thr: u8,
        agg_author: &str,
        agg_book: &str,
        alpha: f64,
        limit: usize,
        n: usize,
    ) -> Vec<(usize, f64)> {
        let (icf, author_books) = self.branches(u, scheme, thr, agg_author, agg_book, limit);
        let fused = wam(&author_books, &icf, alpha);
        self.top_n(u, &fused, n)
    }

    /// Normalized (icf book scores, expanded author book scores).
    pub fn branches(
        &self,
        u: usize,
        scheme: &str,
        thr: u8,
        agg_author: &str,
        agg_book: &str,
        limit: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let book_sim = self.similarity(false, scheme, thr);
        let seeds: Vec<usize> = (0..self.books.len())
            .filter(|&b| self.prefers_book(u, b, thr))
            .collect();
        let cols: Vec<Vec<f64>> = seeds.iter().map(|&s| book_sim[s].clone()).collect();
        let icf = match agg_book {
            "rrf" => rrf(&cols, 60.0, self.books.len()),
            _ => {
                let w: Vec<f64> = seeds
                    .iter()
                    .map(|&s| f64::from(self.rating(u, s).unwrap()))
                    .collect();
                cfpa(&cols, &w, self.books.len())
            }
        };

        let author_sim = self.similarity(true, scheme, thr);
        let seeds: Vec<usize> = (0..self.authors.len())
            .filter(|&a| self.prefers_author(u, a, thr))
            .collect();
        let cols: Vec<Vec<f64>> = seeds.iter().map(|&s| author_sim[s].clone()).collect();
        let authors = match agg_author {
            "rrf" => rrf(&cols, 60.0, self.authors.len()),
            _ => {
                let w: Vec<f64> = seeds.iter().map(|&s| self.author_avg(u, s).unwrap()).collect();
                cfpa(&cols, &w, self.authors.len())
            }
        };
        (normalize(&icf), normalize(&self.expand(&authors, limit)))
    }

    pub fn top_n(&self, u: usize, scores: &[f64], n: usize) -> Vec<(usize, f64)> {
        let mut cand: Vec<(usize, f64)> = scores
            .iter()
            .enumerate()
            .filter(|&(b, &s)| s > 0.0 && self.rating(u, b).is_none())
            .map(|(b, &s)| (b, s))
            .collect();
        cand.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
        cand.truncate(n);
        cand
    }
}

pub fn cosine_dense(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            let ni = rows[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            let nj = rows[j].iter().map(|a| a * a).sum::<f64>().sqrt();
            m[i][j] = if ni == 0.0 || nj == 0.0 { 0.0 } else { dot / (ni * nj) };
        }
    }
    m
}

pub fn ieuc_dense(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            m[i][j] = 1.0 / d.max(IEUC_FLOOR);
        }
    }
    m
}

/// Reciprocal rank fusion over dense columns. The rank of a positive entry
/// is one plus the number of entries that beat it (higher score, or equal
/// score and lower index).
pub fn rrf(cols: &[Vec<f64>], k: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for col in cols {
        for d in 0..n {
            if col[d] <= 0.0 {
                continue;
            }
            let better = (0..n)
                .filter(|&e| col[e] > 0.0 && (col[e] > col[d] || (col[e] == col[d] && e < d)))
                .count();
            out[d] += 1.0 / (k + (better + 1) as f64);
        }
    }
    out
}

pub fn cfpa(cols: &[Vec<f64>], weights: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (col, w) in cols.iter().zip(weights) {
        for d in 0..n {
            out[d] += w * col[d];
        }
    }
    out
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let nz: Vec<f64> = v.iter().copied().filter(|&x| x != 0.0).collect();
    if nz.is_empty() {
        return v.to_vec();
    }
    let lo = nz.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = nz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter()
        .map(|&x| {
            if x == 0.0 {
                0.0
            } else if hi > lo {
                (x - lo) / (hi - lo)
            } else {
                1.0
            }
        })
        .collect()
}

pub fn wam(author: &[f64], book: &[f64], alpha: f64) -> Vec<f64> {
    author
        .iter()
        .zip(book)
        .map(|(a, b)| (alpha * a + (1.0 - alpha) * b) / 2.0)
        .collect()
}

/// Mean over lists of 1/position of the first relevant book (0 if none).
/// Only users with test events count; repeated test ratings keep the
/// latest (higher rating on equal dates).
pub fn mrr(lists: &[(String, Vec<String>)], test: &[RatingEvent], rel: u8) -> f64 {
    let mut latest: BTreeMap<(&str, &str), (NaiveDate, u8)> = BTreeMap::new();
    for ev in test {
        let key = (ev.user_id.as_str(), ev.book_id.as_str());
        let cand = (ev.review_date, ev.rating);
        let slot = latest.entry(key).or_insert(cand);
        if cand > *slot {
            *slot = cand;
        }
    }
    let test_users: HashSet<&str> = test.iter().map(|e| e.user_id.as_str()).collect();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (user, books) in lists {
        if !test_users.contains(user.as_str()) {
            continue;
        }
        n += 1;
        for (p, b) in books.iter().enumerate() {
            if latest
                .get(&(user.as_str(), b.as_str()))
                .is_some_and(|&(_, r)| r >= rel)
            {
                sum += 1.0 / (p as f64 + 1.0);
                break;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Two rankings agree if they have the same length and every position holds
/// the same item, or items whose reference scores are within `tol` (so a
/// float-level tie may resolve either way).
pub fn same_ordering(got: &[usize], want: &[(usize, f64)], score_of: impl Fn(usize) -> f64, tol: f64) -> bool {
    if got.len() != want.len() {
        // a near-tie at the cut-off can also shift the length by the tail
        return false;
    }
    got.iter()
        .zip(want)
        .all(|(&g, &(w, ws))| g == w || (score_of(g) - ws).abs() <= tol)
}
