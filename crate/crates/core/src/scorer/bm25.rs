//! Okapi BM25 lexical scoring.
//!
//! Scores use `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))` and the
//! saturation term `tf (k1 + 1) / (tf + k1 (1 - b + b len/avglen))`, summed
//! over the distinct query terms. Tokenization lowercases, splits on
//! whitespace, and additionally splits CJK characters into single-character
//! tokens so Chinese text scores without a word segmenter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// BM25 shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

fn is_cjk(ch: char) -> bool {
    matches!(u32::from(ch),
        0x3400..=0x4DBF       // Han extension A
        | 0x4E00..=0x9FFF     // Han unified
        | 0xF900..=0xFAFF     // Han compatibility
        | 0x20000..=0x2A6DF   // Han extension B
        | 0x3040..=0x309F     // Hiragana
        | 0x30A0..=0x30FF     // Katakana
        | 0xAC00..=0xD7AF     // Hangul syllables
    )
}

/// Lowercased tokens: whitespace-separated runs, with each CJK character a
/// token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if is_cjk(ch) {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            out.push(ch.to_string());
        } else {
            cur.extend(ch.to_lowercase());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// An inverted-statistics index over a fixed document list.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    term_freqs: Vec<BTreeMap<String, usize>>,
    doc_lens: Vec<usize>,
    avg_len: f64,
    doc_freq: BTreeMap<String, usize>,
}

impl Bm25Index {
    /// Tokenize and index `docs`. An empty document list is an error;
    /// individual empty documents are fine.
    pub fn build(docs: &[String], params: Bm25Params) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::InvalidParam {
                name: "docs".into(),
                detail: "cannot index an empty corpus".into(),
            });
        }
        if !(params.k1 >= 0.0 && (0.0..=1.0).contains(&params.b)) {
            return Err(Error::InvalidParam {
                name: "bm25 params".into(),
                detail: format!("need k1 >= 0 and b in [0, 1], got k1={} b={}", params.k1, params.b),
            });
        }
        let mut term_freqs = Vec::with_capacity(docs.len());
        let mut doc_lens = Vec::with_capacity(docs.len());
        let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let tokens = tokenize(doc);
            doc_lens.push(tokens.len());
            let mut tf: BTreeMap<String, usize> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for term in tf.keys() {
                *doc_freq.entry(term.clone()).or_insert(0) += 1;
            }
            term_freqs.push(tf);
        }
        let avg_len = doc_lens.iter().sum::<usize>() as f64 / docs.len() as f64;
        Ok(Bm25Index { params, term_freqs, doc_lens, avg_len, doc_freq })
    }

    pub fn n_docs(&self) -> usize {
        self.term_freqs.len()
    }

    /// BM25 score of every indexed document against `query`, in index order.
    /// Query terms absent from the corpus contribute zero.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let n = self.n_docs() as f64;
        let mut query_terms = tokenize(query);
        query_terms.sort_unstable();
        query_terms.dedup();

        let mut out = vec![0.0; self.n_docs()];
        if self.avg_len == 0.0 {
            return out; // every document is empty; nothing can match
        }
        for term in &query_terms {
            let Some(&df) = self.doc_freq.get(term) else { continue };
            let idf = (1.0 + (n - df as f64 + 0.5) / (df as f64 + 0.5)).ln();
            for (i, tf_map) in self.term_freqs.iter().enumerate() {
                let Some(&tf) = tf_map.get(term) else { continue };
                let tf = tf as f64;
                let len_norm = 1.0 - self.params.b
                    + self.params.b * self.doc_lens[i] as f64 / self.avg_len;
                out[i] += idf * tf * (self.params.k1 + 1.0) / (tf + self.params.k1 * len_norm);
            }
        }
        out
    }
}

/// One-shot BM25: index `docs` and score them against `query`.
pub fn bm25_score(query: &str, docs: &[String], params: Bm25Params) -> Result<Vec<f64>> {
    Ok(Bm25Index::build(docs, params)?.scores(query))
}
