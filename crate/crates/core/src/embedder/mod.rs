//! Embedding records, stores, caching, and batched embedding of documents.
//!
//! Base embeddings are produced once by a provider (HTTP service, precomputed
//! file, or a deterministic local provider) and kept frozen; everything
//! downstream consumes them through an [`EmbeddingStore`]. Vectors are
//! L2-normalized before storage, so any positive per-vector scaling applied
//! by a provider is absorbed here. Provider results are cached by
//! `(provider tag, text hash)` so re-runs skip unchanged texts.

pub mod providers;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::{flatten_document, Document};
use crate::error::{Error, Result};
use crate::hashing::content_hash;
use crate::jsonl;

use providers::{EmbedRequest, EmbeddingProvider};

/// Maximum deviation from unit norm a stored vector may have.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// L2-normalize a vector. Errors on zero norm and on NaN or infinite
/// entries (including overflow of the norm itself).
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { context: "normalize input".into() });
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector { context: "normalize input".into() });
    }
    if !norm.is_finite() {
        return Err(Error::NonFinite { context: "normalize: norm overflow".into() });
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// One stored embedding: a unit-norm vector plus its origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub doc_id: String,
    pub dim: usize,
    pub vector: Vec<f64>,
    /// Provider tag that produced the vector.
    pub provider: String,
    /// True when the embedded text included generated augmentation content.
    pub augmented: bool,
}

/// A set of embedding records sharing one provider and one dimension,
/// ordered by doc id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    provider: String,
    dim: usize,
    records: BTreeMap<String, EmbeddingRecord>,
}

impl EmbeddingStore {
    pub fn new(provider: impl Into<String>, dim: usize) -> Self {
        EmbeddingStore { provider: provider.into(), dim, records: BTreeMap::new() }
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Doc ids in ascending order.
    pub fn ids(&self) -> Vec<String> {
        self.records.keys().cloned().collect()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.records.contains_key(doc_id)
    }

    pub fn get(&self, doc_id: &str) -> Option<&EmbeddingRecord> {
        self.records.get(doc_id)
    }

    /// Like [`EmbeddingStore::get`] but a missing id is an error.
    pub fn require(&self, doc_id: &str) -> Result<&EmbeddingRecord> {
        self.records
            .get(doc_id)
            .ok_or_else(|| Error::MissingEmbedding { doc_id: doc_id.to_string() })
    }

    /// The unit vector for a doc id; a missing id is an error.
    pub fn vector(&self, doc_id: &str) -> Result<&[f64]> {
        Ok(self.require(doc_id)?.vector.as_slice())
    }

    pub fn records(&self) -> impl Iterator<Item = &EmbeddingRecord> {
        self.records.values()
    }

    /// Insert a record, enforcing provider, dimension, unit norm, and
    /// uniqueness.
    pub fn insert(&mut self, record: EmbeddingRecord) -> Result<()> {
        if record.provider != self.provider {
            return Err(Error::ProviderMismatch {
                expected: self.provider.clone(),
                got: record.provider,
                doc_id: record.doc_id,
            });
        }
        if record.dim != self.dim || record.vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: format!("embedding for {:?}", record.doc_id),
                expected: self.dim,
                got: record.vector.len(),
            });
        }
        if record.vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("embedding for {:?}", record.doc_id),
            });
        }
        let norm = record.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::Invalid {
                detail: format!(
                    "embedding for {:?} has norm {norm}, expected unit within {UNIT_NORM_TOLERANCE}",
                    record.doc_id
                ),
            });
        }
        if self.records.contains_key(&record.doc_id) {
            return Err(Error::DuplicateEmbedding { doc_id: record.doc_id });
        }
        self.records.insert(record.doc_id.clone(), record);
        Ok(())
    }

    /// A new store holding only the listed ids; all must be present.
    pub fn subset(&self, ids: &[String]) -> Result<EmbeddingStore> {
        let mut out = EmbeddingStore::new(self.provider.clone(), self.dim);
        for id in ids {
            out.insert(self.require(id)?.clone())?;
        }
        Ok(out)
    }

    /// Write records to JSONL in doc-id order. Floats survive the round trip
    /// bit-for-bit.
    pub fn save(&self, path: &Path) -> Result<()> {
        let rows: Vec<&EmbeddingRecord> = self.records.values().collect();
        jsonl::write_jsonl(path, &rows)
    }

    /// Load a store from JSONL; provider and dimension are taken from the
    /// first record and enforced on the rest.
    pub fn load(path: &Path) -> Result<EmbeddingStore> {
        let rows: Vec<EmbeddingRecord> = jsonl::read_jsonl(path)?;
        let first = rows.first().ok_or_else(|| Error::Invalid {
            detail: format!("no embedding records in {}", path.display()),
        })?;
        let mut store = EmbeddingStore::new(first.provider.clone(), first.dim);
        for row in rows {
            store.insert(row)?;
        }
        Ok(store)
    }
}

// ======================================================
// Cache
// ======================================================

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheRow {
    provider: String,
    text_hash: String,
    vector: Vec<f64>,
}

/// Persistent map from `(provider tag, text hash)` to a normalized vector.
#[derive(Debug, Clone, Default)]
pub struct EmbedCache {
    entries: BTreeMap<(String, String), Vec<f64>>,
}

impl EmbedCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, provider: &str, text_hash: &str) -> Option<&Vec<f64>> {
        self.entries.get(&(provider.to_string(), text_hash.to_string()))
    }

    pub fn put(&mut self, provider: &str, text_hash: &str, vector: Vec<f64>) {
        self.entries.insert((provider.to_string(), text_hash.to_string()), vector);
    }

    pub fn load(path: &Path) -> Result<EmbedCache> {
        let rows: Vec<CacheRow> = jsonl::read_jsonl(path)?;
        let mut cache = EmbedCache::new();
        for row in rows {
            cache.entries.insert((row.provider, row.text_hash), row.vector);
        }
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let rows: Vec<CacheRow> = self
            .entries
            .iter()
            .map(|((provider, text_hash), vector)| CacheRow {
                provider: provider.clone(),
                text_hash: text_hash.clone(),
                vector: vector.clone(),
            })
            .collect();
        jsonl::write_jsonl(path, &rows)
    }
}

// ======================================================
// Batched embedding
// ======================================================

/// Embed documents through a provider, reading and filling `cache`.
///
/// The text for each document is its flattened form unless
/// `augmented_texts` supplies an override (overridden documents are marked
/// `augmented`). Uncached texts are chunked into provider-sized batches and
/// dispatched with at most `provider.max_in_flight()` batches outstanding;
/// results are assembled in document order, so the output never depends on
/// completion order. Provider failures abort the call and name every
/// affected doc id.
pub fn embed_documents(
    docs: &[Document],
    provider: &dyn EmbeddingProvider,
    augmented_texts: Option<&BTreeMap<String, String>>,
    cache: Option<&mut EmbedCache>,
) -> Result<EmbeddingStore> {
    if docs.is_empty() {
        return Err(Error::InvalidParam {
            name: "docs".into(),
            detail: "no documents to embed".into(),
        });
    }

    struct Pending {
        doc_index: usize,
        request: EmbedRequest,
        text_hash: String,
    }

    let mut texts = Vec::with_capacity(docs.len());
    for doc in docs {
        let (text, augmented) = match augmented_texts.and_then(|m| m.get(&doc.id)) {
            Some(t) => (t.clone(), true),
            None => (flatten_document(doc), false),
        };
        texts.push((text, augmented));
    }

    let mut vectors: Vec<Option<Vec<f64>>> = vec![None; docs.len()];
    let mut from_cache = vec![false; docs.len()];
    let mut pending: Vec<Pending> = Vec::new();
    for (i, (doc, (text, _))) in docs.iter().zip(&texts).enumerate() {
        let hash = content_hash(text);
        if let Some(hit) = cache.as_ref().and_then(|c| c.get(provider.name(), &hash)) {
            vectors[i] = Some(hit.clone());
            from_cache[i] = true;
        } else {
            pending.push(Pending {
                doc_index: i,
                request: EmbedRequest { doc_id: doc.id.clone(), text: text.clone() },
                text_hash: hash,
            });
        }
    }

    let batch_size = provider.batch_size().max(1);
    let batches: Vec<&[Pending]> = pending.chunks(batch_size).collect();
    let workers = provider.max_in_flight().clamp(1, batches.len().max(1));

    let mut batch_results: Vec<Option<Result<Vec<Vec<f64>>>>> =
        (0..batches.len()).map(|_| None).collect();
    if workers <= 1 {
        for (bi, batch) in batches.iter().enumerate() {
            let requests: Vec<EmbedRequest> = batch.iter().map(|p| p.request.clone()).collect();
            batch_results[bi] = Some(provider.embed_batch(&requests));
        }
    } else {
        let next = Mutex::new(0usize);
        let results = Mutex::new(&mut batch_results);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let bi = {
                        let mut guard = next.lock().unwrap();
                        if *guard >= batches.len() {
                            break;
                        }
                        let bi = *guard;
                        *guard += 1;
                        bi
                    };
                    let requests: Vec<EmbedRequest> =
                        batches[bi].iter().map(|p| p.request.clone()).collect();
                    let out = provider.embed_batch(&requests);
                    results.lock().unwrap()[bi] = Some(out);
                });
            }
        });
    }

    let mut failed_ids = Vec::new();
    let mut failure_detail = String::new();
    for (bi, batch) in batches.iter().enumerate() {
        match batch_results[bi].take() {
            Some(Ok(raw)) => {
                if raw.len() != batch.len() {
                    return Err(Error::ProviderFailure {
                        provider: provider.name().to_string(),
                        detail: format!(
                            "returned {} vector(s) for a batch of {}",
                            raw.len(),
                            batch.len()
                        ),
                        failed_ids: batch.iter().map(|p| p.request.doc_id.clone()).collect(),
                    });
                }
                for (p, v) in batch.iter().zip(raw) {
                    vectors[p.doc_index] = Some(v);
                }
            }
            Some(Err(e)) => {
                failed_ids.extend(batch.iter().map(|p| p.request.doc_id.clone()));
                if failure_detail.is_empty() {
                    failure_detail = e.to_string();
                }
            }
            None => unreachable!("batch {bi} never ran"),
        }
    }
    if !failed_ids.is_empty() {
        return Err(Error::ProviderFailure {
            provider: provider.name().to_string(),
            detail: failure_detail,
            failed_ids,
        });
    }

    // Normalize, size the store from the first vector, and insert in
    // document order. Cache hits were normalized when first cached, and
    // renormalizing would perturb their last bits, so they pass through.
    let mut normalized: Vec<Vec<f64>> = Vec::with_capacity(docs.len());
    for (i, doc) in docs.iter().enumerate() {
        let raw = vectors[i].take().expect("every document embedded");
        let unit = if from_cache[i] {
            raw
        } else {
            normalize(&raw).map_err(|e| Error::Invalid {
                detail: format!("embedding for {:?}: {e}", doc.id),
            })?
        };
        normalized.push(unit);
    }
    let dim = normalized[0].len();
    let mut store = EmbeddingStore::new(provider.name(), dim);
    let mut new_cache_entries: Vec<(String, Vec<f64>)> = Vec::new();
    let pending_hashes: BTreeMap<usize, &str> =
        pending.iter().map(|p| (p.doc_index, p.text_hash.as_str())).collect();
    for (i, (doc, (_, augmented))) in docs.iter().zip(&texts).enumerate() {
        let unit = normalized[i].clone();
        if unit.len() != dim {
            return Err(Error::DimensionMismatch {
                context: format!("embedding for {:?}", doc.id),
                expected: dim,
                got: unit.len(),
            });
        }
        if let Some(hash) = pending_hashes.get(&i) {
            new_cache_entries.push((hash.to_string(), unit.clone()));
        }
        store.insert(EmbeddingRecord {
            doc_id: doc.id.clone(),
            dim,
            vector: unit,
            provider: provider.name().to_string(),
            augmented: *augmented,
        })?;
    }
    if let Some(cache) = cache {
        for (hash, vector) in new_cache_entries {
            cache.put(provider.name(), &hash, vector);
        }
    }
    Ok(store)
}
