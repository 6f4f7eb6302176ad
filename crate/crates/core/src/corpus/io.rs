use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use super::{CorpusError, RatingEvent, Result};

const COLUMNS: [&str; 5] = ["user_id", "book_id", "author_id", "rating", "review_date"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingsFormat {
    Csv,
    JsonLines,
}

impl RatingsFormat {
    /// `.jsonl` / `.ndjson` / `.json` are JSON-lines, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson" | "json") => Self::JsonLines,
            _ => Self::Csv,
        }
    }
}

#[derive(Debug, Deserialize)]
struct CsvRecord {
    user_id: String,
    book_id: String,
    author_id: String,
    rating: String,
    review_date: String,
}

#[derive(Debug, Deserialize)]
struct JsonRecord {
    user_id: String,
    book_id: String,
    author_id: String,
    rating: serde_json::Value,
    review_date: String,
}

fn malformed(line: u64, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedRecord {
        line,
        reason: reason.into(),
    }
}

fn check_id(line: u64, name: &str, value: &str) -> Result<String> {
    let value = value.trim();
    if value.is_empty() {
        return Err(malformed(line, format!("empty {name}")));
    }
    Ok(value.to_owned())
}

fn check_rating(line: u64, value: i64) -> Result<u8> {
    if (1..=5).contains(&value) {
        Ok(value as u8)
    } else {
        Err(CorpusError::RatingOutOfRange { line, value })
    }
}

fn parse_rating_str(line: u64, raw: &str) -> Result<u8> {
    let value: i64 = raw
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("rating {raw:?} is not an integer")))?;
    check_rating(line, value)
}

fn parse_date(line: u64, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
        .map_err(|e| malformed(line, format!("review_date {raw:?}: {e}")))
}

/// Loads rating events from a CSV or JSON-lines file. The first bad record
/// aborts the load with its line number.
pub fn load_ratings(path: &Path, format: RatingsFormat) -> Result<Vec<RatingEvent>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile(path.display().to_string()),
        _ => CorpusError::Io(e),
    })?;
    match format {
        RatingsFormat::Csv => read_csv(file),
        RatingsFormat::JsonLines => read_json_lines(file),
    }
}

fn read_csv(reader: impl Read) -> Result<Vec<RatingEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if headers.iter().all(str::is_empty) {
        // zero-byte file
        return Ok(Vec::new());
    }
    for col in COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(malformed(1, format!("missing column {col}")));
        }
    }

    let mut events = Vec::new();
    for raw in rdr.records() {
        let raw = raw.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = raw.position().map_or(0, |p| p.line());
        let rec: CsvRecord = raw
            .deserialize(Some(&headers))
            .map_err(|e| malformed(line, e.to_string()))?;
        events.push(RatingEvent {
            user_id: check_id(line, "user_id", &rec.user_id)?,
            book_id: check_id(line, "book_id", &rec.book_id)?,
            author_id: check_id(line, "author_id", &rec.author_id)?,
            rating: parse_rating_str(line, &rec.rating)?,
            review_date: parse_date(line, &rec.review_date)?,
        });
    }
    Ok(events)
}

fn read_json_lines(reader: impl Read) -> Result<Vec<RatingEvent>> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord =
            serde_json::from_str(&line).map_err(|e| malformed(line_no, e.to_string()))?;
        let rating = match &rec.rating {
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(v) => check_rating(line_no, v)?,
                None => return Err(malformed(line_no, format!("rating {n} is not an integer"))),
            },
            serde_json::Value::String(s) => parse_rating_str(line_no, s)?,
            other => return Err(malformed(line_no, format!("rating {other} is not an integer"))),
        };
        events.push(RatingEvent {
            user_id: check_id(line_no, "user_id", &rec.user_id)?,
            book_id: check_id(line_no, "book_id", &rec.book_id)?,
            author_id: check_id(line_no, "author_id", &rec.author_id)?,
            rating,
            review_date: parse_date(line_no, &rec.review_date)?,
        });
    }
    Ok(events)
}

/// Writes events in the ratings CSV layout, header included.
pub fn write_ratings_csv<W: Write>(events: &[RatingEvent], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(COLUMNS).map_err(csv_io)?;
    for ev in events {
        wtr.write_record([
            ev.user_id.as_str(),
            ev.book_id.as_str(),
            ev.author_id.as_str(),
            &ev.rating.to_string(),
            &ev.review_date.format("%Y-%m-%d").to_string(),
        ])
        .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CorpusError {
    CorpusError::Io(std::io::Error::other(e))
}
