//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use bookrec_core::predictor::AuthorWeighting;
use bookrec_core::EvalConfig;

use crate::error::{Failure, Result};

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.9;
pub const DEFAULT_OUT_DIR: &str = "bookrec-out";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub users: usize,
    pub authors: usize,
    pub books_per_author: usize,
    pub affinity: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 200,
            authors: 40,
            books_per_author: 6,
            affinity: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub eval: EvalConfig,
    pub ratings: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub use_cache: bool,
    pub split_fraction: f64,
    pub synth: SynthConfig,
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eval: EvalConfig::default(),
            ratings: None,
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            cache_dir: None,
            use_cache: true,
            split_fraction: DEFAULT_SPLIT_FRACTION,
            synth: SynthConfig::default(),
            seed: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Failure::input(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Failure::input(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl RunConfig {
    /// Sets one field by key. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let key = key.as_str();
        match key {
            "ratings" => self.ratings = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "cache" => self.use_cache = parse_bool(key, value)?,
            "split_fraction" => self.split_fraction = parse(key, value)?,
            "scheme" => self.eval.scheme = parse(key, value)?,
            "agg_author" => self.eval.agg_author.function = parse(key, value)?,
            "agg_book" => self.eval.agg_book.function = parse(key, value)?,
            "author_weight" => {
                self.eval.agg_author.author_weight = match value {
                    "avg" | "average" | "average_rating" => AuthorWeighting::AverageRating,
                    "count" | "preferred_count" => AuthorWeighting::PreferredCount,
                    _ => {
                        return Err(Failure::input(format!(
                            "author_weight: expected avg or count, got {value:?}"
                        )))
                    }
                }
            }
            "rrf_k" => {
                let k = parse(key, value)?;
                self.eval.agg_author.rrf_k = k;
                self.eval.agg_book.rrf_k = k;
            }
            "alpha" => self.eval.fusion.alpha = parse(key, value)?,
            "limit" | "max_books_per_author" => self.eval.fusion.max_books_per_author = parse(key, value)?,
            "top_n" => self.eval.fusion.top_n = parse(key, value)?,
            "threshold" | "preference_threshold" => self.eval.preference_threshold = parse(key, value)?,
            "relevance_threshold" => self.eval.relevance_threshold = parse(key, value)?,
            "users" => self.synth.users = parse(key, value)?,
            "authors" => self.synth.authors = parse(key, value)?,
            "books_per_author" => self.synth.books_per_author = parse(key, value)?,
            "affinity" => self.synth.affinity = parse(key, value)?,
            _ => return Err(Failure::input(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` starts a
    /// comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Failure::input(format!("{}:{}: expected key = value", origin.display(), i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Failure::input(format!("{}:{}: {}", origin.display(), i + 1, e.message())))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
        self.apply_text(&text, path)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Failure::input(format!(
                "split_fraction {} must lie strictly between 0 and 1",
                self.split_fraction
            )));
        }
        self.eval.validate()?;
        Ok(())
    }

    /// The ratings file, which must exist.
    pub fn ratings_path(&self) -> Result<&Path> {
        let path = self
            .ratings
            .as_deref()
            .ok_or_else(|| Failure::input("no ratings file given (--ratings or `ratings =` in the config)"))?;
        if !path.is_file() {
            return Err(Failure::input(format!("ratings file not found: {}", path.display())));
        }
        Ok(path)
    }
}
