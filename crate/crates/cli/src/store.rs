//! Atomic file output and the on-disk similarity matrix cache.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bookrec_core::corpus::{build_profiles, write_ratings_csv, Catalog};
use bookrec_core::{Engine, ItemKind, RatingEvent, Scheme, SimilarityMatrix};
use sha2::{Digest, Sha256};

use crate::error::{Failure, Result};

/// Writes through a temporary file in the target directory, then renames it
/// into place.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .map_err(|e| Failure::internal(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Hex SHA-256 of the events in the ratings CSV layout.
pub fn corpus_hash(events: &[RatingEvent]) -> Result<String> {
    let mut buf = Vec::new();
    write_ratings_csv(events, &mut buf)?;
    Ok(Sha256::digest(&buf).iter().map(|b| format!("{b:02x}")).collect())
}

/// Matrices keyed by (training corpus hash, scheme, preference threshold).
pub struct MatrixCache {
    dir: Option<PathBuf>,
}

impl MatrixCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    fn paths(&self, hash: &str, scheme: Scheme, threshold: u8) -> Option<[PathBuf; 2]> {
        let dir = self.dir.as_ref()?;
        let stem = format!("{}-{}-t{threshold}", &hash[..32], scheme.name());
        Some([ItemKind::Book, ItemKind::Author].map(|k| dir.join(format!("{stem}-{}.bin", k.name()))))
    }

    /// Loads both matrices if cached, otherwise trains and stores them.
    pub fn engine(&self, train: &[RatingEvent], scheme: Scheme, threshold: u8) -> Result<Engine> {
        let Some(paths) = self.paths(&corpus_hash(train)?, scheme, threshold) else {
            return Ok(Engine::train(train, scheme, threshold)?);
        };
        if paths.iter().all(|p| p.is_file()) {
            match load(train, scheme, threshold, &paths) {
                Ok(engine) => {
                    log::info!("loaded {} matrices from cache", scheme.name());
                    return Ok(engine);
                }
                Err(e) => log::warn!("ignoring matrix cache: {}", e.message()),
            }
        }
        let engine = Engine::train(train, scheme, threshold)?;
        for (path, m) in paths.iter().zip([engine.book_sim(), engine.author_sim()]) {
            write_atomic(path, |w| Ok(m.write_binary(w)?))?;
        }
        Ok(engine)
    }
}

fn read_matrix(path: &Path, kind: ItemKind, scheme: Scheme) -> Result<SimilarityMatrix> {
    let m = SimilarityMatrix::read_binary(BufReader::new(File::open(path)?))?;
    if m.kind() != kind || m.scheme() != scheme {
        return Err(Failure::internal(format!("{} holds the wrong matrix", path.display())));
    }
    Ok(m)
}

fn load(train: &[RatingEvent], scheme: Scheme, threshold: u8, paths: &[PathBuf; 2]) -> Result<Engine> {
    let catalog = Catalog::build(train)?;
    let profiles = build_profiles(train, &catalog, threshold)?;
    let book = read_matrix(&paths[0], ItemKind::Book, scheme)?;
    let author = read_matrix(&paths[1], ItemKind::Author, scheme)?;
    Ok(Engine::from_parts(catalog, profiles, book, author)?)
}
