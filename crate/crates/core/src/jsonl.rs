//! Line-oriented JSON file helpers.
//!
//! All corpus, embedding, negative, and augmentation artifacts are JSONL:
//! one JSON object per line, UTF-8, no trailing commas. Readers report the
//! 1-based line number of the first malformed line; writers emit one compact
//! object per line in the order given.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Read every line of `path` as a `T`, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: display.clone(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Write `items` to `path`, one compact JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut writer = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::MalformedLine {
            path: display.clone(),
            line: 0,
            detail: e.to_string(),
        })?;
        writer.write_all(line.as_bytes()).map_err(|e| Error::io(&display, e))?;
        writer.write_all(b"\n").map_err(|e| Error::io(&display, e))?;
    }
    writer.flush().map_err(|e| Error::io(&display, e))
}
