//! Temperature-scaled cosine scoring and exact top-k ranking.
//!
//! A pair's score is `cos(g(r), g(j)) / T` where `g` is the adapter
//! projection. Because both inputs pass through L2 normalization inside `g`,
//! scores are invariant to any positive rescaling of the raw embeddings or
//! of the adapter matrix itself. Rankings are exact (brute force) with a
//! deterministic tie-break: equal scores order by ascending candidate id.

pub mod bm25;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapter::AdapterParams;
use crate::embedder::EmbeddingStore;
use crate::error::{Error, Result};

/// Score one (resume, job) pair: `cos(g(r), g(j)) / T`.
pub fn score(resume: &[f64], job: &[f64], adapter: &AdapterParams) -> Result<f64> {
    let gr = adapter.project(resume)?;
    let gj = adapter.project(job)?;
    let cos: f64 = gr.iter().zip(&gj).map(|(a, b)| a * b).sum();
    Ok(cos / adapter.temperature())
}

// ======================================================
// Score matrix
// ======================================================

/// Dense row-major matrix of pair scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    scores: Vec<f64>,
    row_index: BTreeMap<String, usize>,
    col_index: BTreeMap<String, usize>,
}

impl ScoreMatrix {
    /// Build from parts; `scores` is row-major `rows x cols` and must be
    /// finite.
    pub fn new(row_ids: Vec<String>, col_ids: Vec<String>, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != row_ids.len() * col_ids.len() {
            return Err(Error::DimensionMismatch {
                context: "score matrix".into(),
                expected: row_ids.len() * col_ids.len(),
                got: scores.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite { context: "score matrix".into() });
        }
        let row_index: BTreeMap<String, usize> =
            row_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let col_index: BTreeMap<String, usize> =
            col_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        if row_index.len() != row_ids.len() || col_index.len() != col_ids.len() {
            return Err(Error::Invalid { detail: "duplicate ids in score matrix".into() });
        }
        Ok(ScoreMatrix { row_ids, col_ids, scores, row_index, col_index })
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    /// Scores of one row, in column order.
    pub fn row(&self, row_id: &str) -> Result<&[f64]> {
        let i = self
            .row_index
            .get(row_id)
            .ok_or_else(|| Error::UnknownDoc { id: row_id.to_string() })?;
        let n = self.col_ids.len();
        Ok(&self.scores[i * n..(i + 1) * n])
    }

    pub fn get(&self, row_id: &str, col_id: &str) -> Result<f64> {
        let j = self
            .col_index
            .get(col_id)
            .ok_or_else(|| Error::UnknownDoc { id: col_id.to_string() })?;
        Ok(self.row(row_id)?[*j])
    }

    /// Write as JSONL: a header `{"col_ids": [...]}` then one
    /// `{"resume_id": ..., "scores": [...]}` row per matrix row.
    pub fn save(&self, path: &Path) -> Result<()> {
        let display = path.display().to_string();
        let file = File::create(path).map_err(|e| Error::io(&display, e))?;
        let mut w = BufWriter::new(file);
        let header = serde_json::json!({ "col_ids": self.col_ids });
        writeln!(w, "{header}").map_err(|e| Error::io(&display, e))?;
        let n = self.col_ids.len();
        for (i, id) in self.row_ids.iter().enumerate() {
            let row = serde_json::json!({
                "resume_id": id,
                "scores": &self.scores[i * n..(i + 1) * n],
            });
            writeln!(w, "{row}").map_err(|e| Error::io(&display, e))?;
        }
        w.flush().map_err(|e| Error::io(&display, e))
    }

    /// Read back a matrix written by [`ScoreMatrix::save`].
    pub fn load(path: &Path) -> Result<ScoreMatrix> {
        #[derive(Deserialize)]
        struct Header {
            col_ids: Vec<String>,
        }
        #[derive(Deserialize)]
        struct Row {
            resume_id: String,
            scores: Vec<f64>,
        }
        let display = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(&display, e))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let header: Header = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| Error::io(&display, e))?;
                serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                    path: display.clone(),
                    line: 1,
                    detail: e.to_string(),
                })?
            }
            None => {
                return Err(Error::MalformedLine {
                    path: display,
                    line: 1,
                    detail: "missing header line".into(),
                })
            }
        };
        let mut row_ids = Vec::new();
        let mut scores = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(&display, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Row = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                path: display.clone(),
                line: idx + 1,
                detail: e.to_string(),
            })?;
            if row.scores.len() != header.col_ids.len() {
                return Err(Error::MalformedLine {
                    path: display.clone(),
                    line: idx + 1,
                    detail: format!(
                        "row has {} scores, header lists {} columns",
                        row.scores.len(),
                        header.col_ids.len()
                    ),
                });
            }
            row_ids.push(row.resume_id);
            scores.extend(row.scores);
        }
        ScoreMatrix::new(row_ids, header.col_ids, scores)
    }
}

/// Score every (row, col) pair through the adapter. Each embedding is
/// projected once, so cost is `O((R + C) d^2 + R C d)`.
pub fn score_matrix(
    row_ids: &[String],
    col_ids: &[String],
    store: &EmbeddingStore,
    adapter: &AdapterParams,
) -> Result<ScoreMatrix> {
    let project_all = |ids: &[String]| -> Result<Vec<Vec<f64>>> {
        ids.iter().map(|id| adapter.project(store.vector(id)?)).collect()
    };
    let rows = project_all(row_ids)?;
    let cols = project_all(col_ids)?;
    let t = adapter.temperature();
    let mut scores = Vec::with_capacity(rows.len() * cols.len());
    for r in &rows {
        for c in &cols {
            let cos: f64 = r.iter().zip(c).map(|(a, b)| a * b).sum();
            scores.push(cos / t);
        }
    }
    ScoreMatrix::new(row_ids.to_vec(), col_ids.to_vec(), scores)
}

// ======================================================
// Top-k ranking
// ======================================================

/// A query's ranked candidates: descending score, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub query_id: String,
    pub ranked: Vec<(String, f64)>,
}

/// Rank `ids` by `scores` and keep the top `k`. Requires finite scores and
/// `k >= 1`; `k` larger than the candidate list returns the full ranking.
pub fn top_k_from_scores(ids: &[String], scores: &[f64], k: usize) -> Result<Vec<(String, f64)>> {
    if k == 0 {
        return Err(Error::InvalidParam { name: "k".into(), detail: "must be positive".into() });
    }
    if ids.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            context: "top-k candidates".into(),
            expected: ids.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { context: "top-k scores".into() });
    }
    let mut pairs: Vec<(String, f64)> =
        ids.iter().cloned().zip(scores.iter().copied()).collect();
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    pairs.truncate(k);
    Ok(pairs)
}

/// Rank a candidate pool against one query, all resolved in `store`.
/// Exact brute-force scoring; no approximate index.
pub fn top_k(
    query_id: &str,
    pool: &[String],
    store: &EmbeddingStore,
    k: usize,
    adapter: &AdapterParams,
) -> Result<RankingResult> {
    let query = adapter.project(store.vector(query_id)?)?;
    let t = adapter.temperature();
    let mut scores = Vec::with_capacity(pool.len());
    for id in pool {
        let g = adapter.project(store.vector(id)?)?;
        let cos: f64 = query.iter().zip(&g).map(|(a, b)| a * b).sum();
        scores.push(cos / t);
    }
    Ok(RankingResult {
        query_id: query_id.to_string(),
        ranked: top_k_from_scores(pool, &scores, k)?,
    })
}
