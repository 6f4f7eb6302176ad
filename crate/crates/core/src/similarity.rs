//! Item×item similarity matrices for books and authors.
//!
//! Five schemes: cosine and inverted Euclidean distance over item-user
//! rating vectors, preference co-occurrence counts, and cosine / inverted
//! Euclidean over co-occurrence rows ("second order"). Missing ratings are
//! zeros. Matrices are exact, symmetric, stored sparse with the diagonal
//! left out.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{build_profiles, Catalog, CorpusError, RatingEvent, Registry, UserProfile};

/// Distance floor for the inverted Euclidean metric.
pub const IEUC_EPSILON: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SimilarityError {
    #[error("expected a {expected} matrix, got {found}")]
    KindMismatch { expected: ItemKind, found: ItemKind },
    #[error("expected scheme {expected}, got {found}")]
    SchemeMismatch { expected: Scheme, found: Scheme },
    #[error("corrupt matrix cache: {0}")]
    CorruptCache(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimilarityError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Book,
    Author,
}

impl ItemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Book => "book",
            Self::Author => "author",
        }
    }

    pub fn registry(self, catalog: &Catalog) -> &Registry {
        match self {
            Self::Book => catalog.books(),
            Self::Author => catalog.authors(),
        }
    }
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "cosine")]
    Cosine,
    #[serde(rename = "ieuc")]
    Ieuc,
    #[serde(rename = "cooc")]
    Cooc,
    #[serde(rename = "cooc2-cosine")]
    Cooc2Cosine,
    #[serde(rename = "cooc2-ieuc")]
    Cooc2Ieuc,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Cosine,
        Scheme::Ieuc,
        Scheme::Cooc,
        Scheme::Cooc2Cosine,
        Scheme::Cooc2Ieuc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cosine => "cosine",
            Self::Ieuc => "ieuc",
            Self::Cooc => "cooc",
            Self::Cooc2Cosine => "cooc2-cosine",
            Self::Cooc2Ieuc => "cooc2-ieuc",
        }
    }

    fn code(self) -> u8 {
        Self::ALL.iter().position(|&s| s == self).unwrap() as u8
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|sch| sch.name() == s)
            .ok_or_else(|| format!("unknown similarity scheme {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Cosine,
    Ieuc,
}

/// Sparse vector, entries sorted by index, no explicit zeros.
pub type SparseVec = Vec<(usize, f64)>;

/// Items as vectors over users.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemUserMatrix {
    pub kind: ItemKind,
    pub n_users: usize,
    pub rows: Vec<SparseVec>,
}

/// Book rows hold ratings; author rows hold each user's mean rating over
/// that author's books.
pub fn build_item_user(
    train: &[RatingEvent],
    catalog: &Catalog,
    kind: ItemKind,
) -> Result<ItemUserMatrix> {
    let profiles = build_profiles(train, catalog, u8::MAX)?;
    Ok(item_user_from_profiles(&profiles, catalog, kind))
}

pub(crate) fn item_user_from_profiles(
    profiles: &[UserProfile],
    catalog: &Catalog,
    kind: ItemKind,
) -> ItemUserMatrix {
    let mut rows = vec![SparseVec::new(); kind.registry(catalog).len()];
    // users visited in ascending order keep each row sorted
    for p in profiles {
        match kind {
            ItemKind::Book => {
                for (&b, &r) in &p.book_ratings {
                    rows[b].push((p.user, f64::from(r)));
                }
            }
            ItemKind::Author => {
                for (&a, &avg) in &p.author_avg_rating {
                    rows[a].push((p.user, avg));
                }
            }
        }
    }
    ItemUserMatrix {
        kind,
        n_users: catalog.users().len(),
        rows,
    }
}

/// Symmetric sparse item×item scores in compressed-row form. Each row
/// lists every nonzero off-diagonal neighbor in ascending index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    kind: ItemKind,
    scheme: Scheme,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds from strict upper-triangle entries grouped by row: `upper[i]`
    /// holds `(j, score)` with `j > i`, ascending.
    fn from_upper(kind: ItemKind, scheme: Scheme, upper: Vec<SparseVec>) -> Self {
        let n = upper.len();
        let mut rows: Vec<SparseVec> = vec![Vec::new(); n];
        for (i, entries) in upper.into_iter().enumerate() {
            for &(j, v) in &entries {
                debug_assert!(j > i);
                rows[j].push((i, v));
            }
            // everything already in rows[i] came from smaller rows
            rows[i].extend(entries);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in rows {
            for (j, v) in row {
                indices.push(j as u32);
                values.push(v);
            }
            offsets.push(indices.len());
        }
        Self {
            kind,
            scheme,
            offsets,
            indices,
            values,
        }
    }

    pub fn kind(&self) -> ItemKind {
        self.kind
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn n_items(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of stored (directed) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.indices[range.clone()]
            .iter()
            .zip(&self.values[range])
            .map(|(&j, &v)| (j as usize, v))
    }

    pub fn row_vec(&self, i: usize) -> SparseVec {
        self.row(i).collect()
    }

    /// Score of `(i, j)`; zero on the diagonal and for absent pairs.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.indices[range.clone()].binary_search(&(j as u32)) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Upper-triangle entries `(i, j, score)` with `i < j`, row-major.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_items()).flat_map(move |i| {
            self.row(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, v)| (i, j, v))
        })
    }

    /// SHA-256 over kind, scheme and the exact stored bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update([self.kind as u8, self.scheme.code()]);
        for &o in &self.offsets {
            h.update((o as u64).to_le_bytes());
        }
        for &j in &self.indices {
            h.update(j.to_le_bytes());
        }
        for &v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Debug dump as CSV `item_i,item_j,score`, one line per pair `i < j`.
    pub fn write_pairs_csv<W: Write>(&self, ids: &Registry, mut w: W) -> std::io::Result<()> {
        writeln!(w, "item_i,item_j,score")?;
        for (i, j, v) in self.upper_entries() {
            writeln!(w, "{},{},{}", ids.id(i), ids.id(j), v)?;
        }
        w.flush()
    }

    const MAGIC: &'static [u8; 8] = b"BRSIM001";

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&[self.kind as u8, self.scheme.code()])?;
        w.write_all(&(self.n_items() as u64).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for &o in &self.offsets {
            w.write_all(&(o as u64).to_le_bytes())?;
        }
        for &j in &self.indices {
            w.write_all(&j.to_le_bytes())?;
        }
        for &v in &self.values {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let corrupt = |m: &str| SimilarityError::CorruptCache(m.to_owned());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(corrupt("bad magic"));
        }
        let mut tag = [0u8; 2];
        r.read_exact(&mut tag)?;
        let kind = match tag[0] {
            0 => ItemKind::Book,
            1 => ItemKind::Author,
            _ => return Err(corrupt("bad kind")),
        };
        let scheme = *Scheme::ALL
            .get(usize::from(tag[1]))
            .ok_or_else(|| corrupt("bad scheme"))?;
        let mut buf8 = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> std::io::Result<u64> {
            r.read_exact(&mut buf8)?;
            Ok(u64::from_le_bytes(buf8))
        };
        let n = read_u64(&mut r)? as usize;
        let nnz = read_u64(&mut r)? as usize;
        let offsets = (0..=n)
            .map(|_| read_u64(&mut r).map(|o| o as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        let mut buf4 = [0u8; 4];
        let mut indices = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            r.read_exact(&mut buf4)?;
            indices.push(u32::from_le_bytes(buf4));
        }
        let values = (0..nnz)
            .map(|_| read_u64(&mut r).map(f64::from_bits))
            .collect::<std::io::Result<Vec<_>>>()?;
        if offsets.first() != Some(&0)
            || offsets.last() != Some(&nnz)
            || offsets.windows(2).any(|w| w[0] > w[1])
            || indices.iter().any(|&j| j as usize >= n)
        {
            return Err(corrupt("inconsistent layout"));
        }
        Ok(Self {
            kind,
            scheme,
            offsets,
            indices,
            values,
        })
    }
}

fn sq_norm(v: &[(usize, f64)]) -> f64 {
    v.iter().map(|&(_, x)| x * x).sum()
}

fn dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

fn sq_distance(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() || j < b.len() {
        let d = match (a.get(i), b.get(j)) {
            (Some(&(ia, x)), Some(&(ib, y))) if ia == ib => {
                i += 1;
                j += 1;
                x - y
            }
            (Some(&(ia, x)), Some(&(ib, _))) if ia < ib => {
                i += 1;
                x
            }
            (Some(&(_, x)), None) => {
                i += 1;
                x
            }
            (_, Some(&(_, y))) => {
                j += 1;
                -y
            }
            (None, None) => unreachable!(),
        };
        acc += d * d;
    }
    acc
}

/// Inverted Euclidean score for a squared distance, floored at
/// [`IEUC_EPSILON`].
pub fn ieuc_score(sq_dist: f64) -> f64 {
    1.0 / sq_dist.sqrt().max(IEUC_EPSILON)
}

fn pairwise(kind: ItemKind, scheme: Scheme, rows: &[SparseVec], metric: Metric) -> SimilarityMatrix {
    let norms: Vec<f64> = rows.iter().map(|r| sq_norm(r).sqrt()).collect();
    let upper: Vec<SparseVec> = (0..rows.len())
        .into_par_iter()
        .map(|i| {
            ((i + 1)..rows.len())
                .filter_map(|j| {
                    let score = match metric {
                        Metric::Cosine => {
                            if norms[i] == 0.0 || norms[j] == 0.0 {
                                return None;
                            }
                            dot(&rows[i], &rows[j]) / (norms[i] * norms[j])
                        }
                        Metric::Ieuc => ieuc_score(sq_distance(&rows[i], &rows[j])),
                    };
                    (score != 0.0).then_some((j, score))
                })
                .collect()
        })
        .collect();
    SimilarityMatrix::from_upper(kind, scheme, upper)
}

pub fn cosine_matrix(m: &ItemUserMatrix) -> SimilarityMatrix {
    pairwise(m.kind, Scheme::Cosine, &m.rows, Metric::Cosine)
}

pub fn ieuc_matrix(m: &ItemUserMatrix) -> SimilarityMatrix {
    pairwise(m.kind, Scheme::Ieuc, &m.rows, Metric::Ieuc)
}

/// Counts, for every unordered pair of distinct items, the users who prefer
/// both. An author is preferred when the user prefers one of its books.
pub fn cooccurrence_matrix(
    train: &[RatingEvent],
    catalog: &Catalog,
    kind: ItemKind,
    preference_threshold: u8,
) -> Result<SimilarityMatrix> {
    let profiles = build_profiles(train, catalog, preference_threshold)?;
    Ok(cooccurrence_from_profiles(&profiles, catalog, kind))
}

pub(crate) fn cooccurrence_from_profiles(
    profiles: &[UserProfile],
    catalog: &Catalog,
    kind: ItemKind,
) -> SimilarityMatrix {
    let n = kind.registry(catalog).len();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for p in profiles {
        let items: Vec<usize> = match kind {
            ItemKind::Book => p.preferred_books.iter().copied().collect(),
            ItemKind::Author => p.favorite_authors().into_iter().collect(),
        };
        for (x, &i) in items.iter().enumerate() {
            for &j in &items[x + 1..] {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    pairs.sort_unstable();

    let mut upper = vec![SparseVec::new(); n];
    for chunk in pairs.chunk_by(|a, b| a == b) {
        let (i, j) = chunk[0];
        upper[i as usize].push((j as usize, chunk.len() as f64));
    }
    SimilarityMatrix::from_upper(kind, Scheme::Cooc, upper)
}

/// Compares items by their co-occurrence rows.
pub fn second_order_matrix(cooc: &SimilarityMatrix, metric: Metric) -> Result<SimilarityMatrix> {
    if cooc.scheme != Scheme::Cooc {
        return Err(SimilarityError::SchemeMismatch {
            expected: Scheme::Cooc,
            found: cooc.scheme,
        });
    }
    let rows: Vec<SparseVec> = (0..cooc.n_items()).map(|i| cooc.row_vec(i)).collect();
    let scheme = match metric {
        Metric::Cosine => Scheme::Cooc2Cosine,
        Metric::Ieuc => Scheme::Cooc2Ieuc,
    };
    Ok(pairwise(cooc.kind, scheme, &rows, metric))
}

/// Builds the matrix for any scheme from training data.
pub fn build_similarity(
    train: &[RatingEvent],
    catalog: &Catalog,
    kind: ItemKind,
    scheme: Scheme,
    preference_threshold: u8,
) -> Result<SimilarityMatrix> {
    let profiles = build_profiles(train, catalog, preference_threshold)?;
    Ok(similarity_from_profiles(&profiles, catalog, kind, scheme))
}

pub(crate) fn similarity_from_profiles(
    profiles: &[UserProfile],
    catalog: &Catalog,
    kind: ItemKind,
    scheme: Scheme,
) -> SimilarityMatrix {
    let cooc = || cooccurrence_from_profiles(profiles, catalog, kind);
    let second = |metric| second_order_matrix(&cooc(), metric).expect("cooc scheme");
    match scheme {
        Scheme::Cosine => cosine_matrix(&item_user_from_profiles(profiles, catalog, kind)),
        Scheme::Ieuc => ieuc_matrix(&item_user_from_profiles(profiles, catalog, kind)),
        Scheme::Cooc => cooc(),
        Scheme::Cooc2Cosine => second(Metric::Cosine),
        Scheme::Cooc2Ieuc => second(Metric::Ieuc),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::ev;

    fn rows_matrix(rows: Vec<SparseVec>) -> ItemUserMatrix {
        ItemUserMatrix {
            kind: ItemKind::Book,
            n_users: 2,
            rows,
        }
    }

    #[test]
    fn item_user_rows() {
        let train = vec![
            ev("u", "b1", "a", 5, 0),
            ev("v", "b2", "a", 4, 1),
            ev("v", "b3", "a", 2, 2),
        ];
        let cat = Catalog::build(&train).unwrap();
        let books = build_item_user(&train, &cat, ItemKind::Book).unwrap();
        assert_eq!(books.rows[0], vec![(0, 5.0)]);
        let authors = build_item_user(&train, &cat, ItemKind::Author).unwrap();
        assert_eq!(authors.rows[0], vec![(0, 5.0), (1, 3.0)]);
    }

    #[test]
    fn cosine_cases() {
        let m = cosine_matrix(&rows_matrix(vec![
            vec![(0, 5.0)],
            vec![(0, 4.0), (1, 3.0)],
            vec![(0, 5.0)],
            vec![(1, 2.0)],
        ]));
        assert!((m.get(0, 1) - 0.8).abs() < 1e-12);
        assert!((m.get(0, 2) - 1.0).abs() < 1e-12);
        assert_eq!(m.get(0, 3), 0.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn ieuc_cases() {
        let m = ieuc_matrix(&rows_matrix(vec![
            vec![],
            vec![(0, 3.0), (1, 4.0)],
            vec![(0, 3.0), (1, 4.0)],
            vec![(0, 1.0)],
        ]));
        assert!((m.get(0, 1) - 0.2).abs() < 1e-12);
        assert_eq!(m.get(1, 2), 1.0 / IEUC_EPSILON);
        assert!((m.get(1, 2) / 1e9 - 1.0).abs() < 1e-12);
        assert_eq!(m.get(0, 3), 1.0);
    }

    #[test]
    fn cooc_enumeration_example() {
        let train = vec![
            ev("u1", "b1", "a1", 5, 0),
            ev("u1", "b2", "a1", 4, 1),
            ev("u2", "b1", "a1", 5, 2),
            ev("u2", "b2", "a1", 5, 3),
            ev("u2", "b3", "a2", 4, 4),
        ];
        let cat = Catalog::build(&train).unwrap();
        let m = cooccurrence_matrix(&train, &cat, ItemKind::Book, 4).unwrap();
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(0, 2), 1.0);
        assert_eq!(m.get(1, 2), 1.0);
        assert_eq!(m.get(2, 1), 1.0);
    }

    #[test]
    fn cooc_single_user_single_book_is_empty() {
        let train = vec![ev("u1", "b1", "a1", 5, 0)];
        let cat = Catalog::build(&train).unwrap();
        let m = cooccurrence_matrix(&train, &cat, ItemKind::Book, 4).unwrap();
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn cooc_authors_counts_users() {
        let train = vec![
            ev("u1", "b1", "a1", 5, 0),
            ev("u1", "b2", "a2", 4, 1),
            ev("u2", "b1", "a1", 4, 2),
            ev("u2", "b2", "a2", 5, 3),
        ];
        let cat = Catalog::build(&train).unwrap();
        let m = cooccurrence_matrix(&train, &cat, ItemKind::Author, 4).unwrap();
        assert_eq!(m.get(0, 1), 2.0);
    }

    #[test]
    fn second_order_requires_cooc() {
        let m = cosine_matrix(&rows_matrix(vec![vec![(0, 1.0)], vec![(0, 1.0)]]));
        assert!(matches!(
            second_order_matrix(&m, Metric::Cosine),
            Err(SimilarityError::SchemeMismatch { .. })
        ));
    }

    #[test]
    fn second_order_identity_and_zero_rows() {
        // items 0 and 1 both co-occur only with item 2; item 3 is isolated
        let cooc = SimilarityMatrix::from_upper(
            ItemKind::Book,
            Scheme::Cooc,
            vec![vec![(2, 1.0)], vec![(2, 1.0)], vec![], vec![]],
        );
        let m = second_order_matrix(&cooc, Metric::Cosine).unwrap();
        assert_eq!(m.scheme(), Scheme::Cooc2Cosine);
        assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
        for j in 0..3 {
            assert_eq!(m.get(3, j), 0.0);
        }
    }

    #[test]
    fn binary_round_trip_and_fingerprint() {
        let m = ieuc_matrix(&rows_matrix(vec![
            vec![(0, 1.5)],
            vec![(1, 2.0)],
            vec![(0, 1.0), (1, 1.0)],
        ]));
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        let back = SimilarityMatrix::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.fingerprint(), m.fingerprint());
        buf[0] = b'X';
        assert!(SimilarityMatrix::read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn pairs_csv_dump() {
        let train = vec![ev("u1", "b1", "a1", 5, 0), ev("u1", "b2", "a1", 4, 1)];
        let cat = Catalog::build(&train).unwrap();
        let m = cooccurrence_matrix(&train, &cat, ItemKind::Book, 4).unwrap();
        let mut out = Vec::new();
        m.write_pairs_csv(cat.books(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "item_i,item_j,score\nb1,b2,1\n");
    }

    #[test]
    fn scheme_names_parse() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("euclid".parse::<Scheme>().is_err());
    }
}
