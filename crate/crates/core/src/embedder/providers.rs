//! Embedding providers: HTTP service, precomputed file, and deterministic
//! local providers for offline runs and tests.

use std::collections::BTreeMap;
use std::time::Duration;

use rand::distributions::Distribution;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::synthetic::TOKENS_PER_DIM;
use crate::error::{Error, Result};
use crate::scorer::bm25::tokenize;
use crate::seeding::{rng_stream, rng_stream_for};

/// Environment variable holding the embedding service bearer token.
pub const EMBED_KEY_ENV: &str = "FITRANK_EMBED_KEY";

/// One text to embed, identified by its document id.
#[derive(Debug, Clone)]
pub struct EmbedRequest {
    pub doc_id: String,
    pub text: String,
}

/// A source of raw embedding vectors. Vectors need not be normalized; the
/// store normalizes on insert.
pub trait EmbeddingProvider: Sync {
    /// Stable tag identifying the provider (and its configuration) for
    /// records and cache keys.
    fn name(&self) -> &str;

    /// Embed one batch of texts, returning one vector per request in order.
    fn embed_batch(&self, requests: &[EmbedRequest]) -> Result<Vec<Vec<f64>>>;

    /// Texts per request batch.
    fn batch_size(&self) -> usize {
        16
    }

    /// Maximum batches dispatched concurrently.
    fn max_in_flight(&self) -> usize {
        1
    }
}

// ======================================================
// File provider
// ======================================================

/// Serves precomputed vectors keyed by doc id, e.g. from a previously saved
/// `embeddings.jsonl`.
pub struct FileProvider {
    name: String,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl FileProvider {
    pub fn new(name: impl Into<String>, vectors: BTreeMap<String, Vec<f64>>) -> Self {
        FileProvider { name: name.into(), vectors }
    }

    /// Build from a saved store, keeping its provider tag.
    pub fn from_store(store: &crate::embedder::EmbeddingStore) -> Self {
        let vectors =
            store.records().map(|r| (r.doc_id.clone(), r.vector.clone())).collect();
        FileProvider { name: store.provider().to_string(), vectors }
    }
}

impl EmbeddingProvider for FileProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed_batch(&self, requests: &[EmbedRequest]) -> Result<Vec<Vec<f64>>> {
        let missing: Vec<String> = requests
            .iter()
            .filter(|r| !self.vectors.contains_key(&r.doc_id))
            .map(|r| r.doc_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::ProviderFailure {
                provider: self.name.clone(),
                detail: "no precomputed vector".into(),
                failed_ids: missing,
            });
        }
        Ok(requests.iter().map(|r| self.vectors[&r.doc_id].clone()).collect())
    }
}

// ======================================================
// Hashed token provider
// ======================================================

/// Deterministic random-projection embedder: each token hashes to a fixed
/// seeded Gaussian direction, and a text embeds as the sum of its token
/// directions. Texts sharing tokens therefore get correlated vectors, with
/// no model or network involved.
pub struct HashProvider {
    name: String,
    dim: usize,
    seed: u64,
}

impl HashProvider {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashProvider { name: format!("hash-d{dim}-s{seed}"), dim, seed }
    }
}

impl EmbeddingProvider for HashProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed_batch(&self, requests: &[EmbedRequest]) -> Result<Vec<Vec<f64>>> {
        let mut token_dirs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut out = Vec::with_capacity(requests.len());
        for req in requests {
            let tokens = tokenize(&req.text);
            if tokens.is_empty() {
                return Err(Error::ProviderFailure {
                    provider: self.name.clone(),
                    detail: "text has no tokens".into(),
                    failed_ids: vec![req.doc_id.clone()],
                });
            }
            let mut v = vec![0.0; self.dim];
            for token in tokens {
                let dir = token_dirs.entry(token.clone()).or_insert_with(|| {
                    let mut rng = rng_stream_for(self.seed, "hash-provider-token", &token);
                    (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
                });
                for (acc, d) in v.iter_mut().zip(dir.iter()) {
                    *acc += d;
                }
            }
            out.push(v);
        }
        Ok(out)
    }
}

// ======================================================
// Synthetic-corpus provider
// ======================================================

/// Deterministic encoder for token-coded synthetic documents.
///
/// Coordinate tokens `t<d>_<b>` are decoded back to bucket-center values,
/// then pushed through a fixed seeded linear distortion. Raw cosine over
/// these vectors is informative about latent similarity but systematically
/// off, which is exactly the situation a trained projection is meant to
/// correct; an adapter that learns to invert the distortion recovers the
/// latent geometry.
pub struct SyntheticProvider {
    name: String,
    latent_dim: usize,
    distortion: Vec<f64>,
}

impl SyntheticProvider {
    /// `strength` sets how hard the distortion corrupts cosines; 0 means
    /// identity (no distortion).
    ///
    /// The distortion is symmetric positive-definite, `Q diag(e) Qᵀ`, with
    /// a seeded random eigenbasis `Q` and eigenvalues spread as
    /// `exp(strength * t)` for `t` evenly spaced in [-1, 1]. Rotations
    /// leave cosines untouched, so all the corruption comes from the
    /// eigenvalue spread — which is the same for every seed, making the
    /// distortion equally hard across seeds instead of a lottery.
    pub fn with_strength(latent_dim: usize, seed: u64, strength: f64) -> Self {
        let d = latent_dim;
        let mut rng = rng_stream(seed, "synthetic-provider-distortion");
        let mut gaussian = vec![0.0; d * d];
        for g in gaussian.iter_mut() {
            *g = StandardNormal.sample(&mut rng);
        }
        let q = orthogonalize_rows(&gaussian, d);
        let eigen: Vec<f64> = (0..d)
            .map(|i| {
                let t = if d > 1 { -1.0 + 2.0 * i as f64 / (d - 1) as f64 } else { 0.0 };
                (strength * t).exp()
            })
            .collect();
        // distortion = Qᵀ diag(eigen) Q, with Q's rows as the eigenbasis.
        let mut distortion = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                distortion[i * d + j] =
                    (0..d).map(|k| q[k * d + i] * eigen[k] * q[k * d + j]).sum();
            }
        }
        SyntheticProvider {
            name: format!("synthetic-d{latent_dim}-s{seed}-k{strength}"),
            latent_dim,
            distortion,
        }
    }

    pub fn new(latent_dim: usize, seed: u64) -> Self {
        Self::with_strength(latent_dim, seed, 1.0)
    }

    /// The distortion matrix, row-major `latent_dim x latent_dim`. Lets
    /// experiments compare a trained projection against the exact inverse.
    pub fn distortion_matrix(&self) -> &[f64] {
        &self.distortion
    }

    fn decode(&self, text: &str) -> Option<Vec<f64>> {
        let mut x = vec![0.0; self.latent_dim];
        let mut any = false;
        for token in text.split_whitespace() {
            let Some(rest) = token.strip_prefix('t') else { continue };
            let Some((d, b)) = rest.split_once('_') else { continue };
            let (Ok(d), Ok(b)) = (d.parse::<usize>(), b.parse::<usize>()) else { continue };
            if d >= self.latent_dim || b >= TOKENS_PER_DIM {
                continue;
            }
            x[d] = ((b as f64 + 0.5) / TOKENS_PER_DIM as f64) * 2.0 - 1.0;
            any = true;
        }
        any.then_some(x)
    }
}

/// Orthonormalize the rows of a `d x d` matrix with modified Gram-Schmidt,
/// run twice for numerical stability. Seeded Gaussian rows are almost
/// surely independent, so the result is a uniformly random rotation.
fn orthogonalize_rows(m: &[f64], d: usize) -> Vec<f64> {
    let mut q = m.to_vec();
    for _ in 0..2 {
        for i in 0..d {
            for j in 0..i {
                let dot: f64 = (0..d).map(|k| q[i * d + k] * q[j * d + k]).sum();
                for k in 0..d {
                    q[i * d + k] -= dot * q[j * d + k];
                }
            }
            let norm: f64 = (0..d).map(|k| q[i * d + k] * q[i * d + k]).sum::<f64>().sqrt();
            for k in 0..d {
                q[i * d + k] /= norm;
            }
        }
    }
    q
}

impl EmbeddingProvider for SyntheticProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed_batch(&self, requests: &[EmbedRequest]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(requests.len());
        for req in requests {
            let Some(x) = self.decode(&req.text) else {
                return Err(Error::ProviderFailure {
                    provider: self.name.clone(),
                    detail: "no coordinate tokens in text".into(),
                    failed_ids: vec![req.doc_id.clone()],
                });
            };
            let d = self.latent_dim;
            let mut y = vec![0.0; d];
            for i in 0..d {
                let row = &self.distortion[i * d..(i + 1) * d];
                y[i] = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            }
            out.push(y);
        }
        Ok(out)
    }
}

// ======================================================
// HTTP provider
// ======================================================

#[derive(Serialize)]
struct EmbedHttpRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedHttpResponse {
    vectors: Vec<Vec<f64>>,
}

/// Calls a remote embedding service: `POST {base_url}/embed` with
/// `{"texts": [...]}`, expecting `{"vectors": [[...]]}`. Failed calls are
/// retried with exponential backoff before the batch is reported failed.
pub struct HttpEmbedProvider {
    name: String,
    base_url: String,
    api_key: Option<String>,
    batch_size: usize,
    max_in_flight: usize,
    max_retries: u32,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

impl HttpEmbedProvider {
    /// Build a provider for `base_url`, reading the bearer token from the
    /// `FITRANK_EMBED_KEY` environment variable if set.
    pub fn new(name: impl Into<String>, base_url: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| Error::Invalid { detail: format!("http client: {e}") })?;
        Ok(HttpEmbedProvider {
            name: name.into(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: std::env::var(EMBED_KEY_ENV).ok(),
            batch_size: 16,
            max_in_flight: 4,
            max_retries: 3,
            backoff: Duration::from_millis(200),
            client,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_max_in_flight(mut self, max_in_flight: usize) -> Self {
        self.max_in_flight = max_in_flight.max(1);
        self
    }

    pub fn with_retry(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    fn call_once(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f64>>, String> {
        let mut req = self
            .client
            .post(format!("{}/embed", self.base_url))
            .json(&EmbedHttpRequest { texts: texts.to_vec() });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("status {status}"));
        }
        let body: EmbedHttpResponse = resp.json().map_err(|e| e.to_string())?;
        Ok(body.vectors)
    }
}

impl EmbeddingProvider for HttpEmbedProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    fn embed_batch(&self, requests: &[EmbedRequest]) -> Result<Vec<Vec<f64>>> {
        let texts: Vec<&str> = requests.iter().map(|r| r.text.as_str()).collect();
        let mut last_err = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.call_once(&texts) {
                Ok(vectors) => return Ok(vectors),
                Err(e) => last_err = e,
            }
        }
        Err(Error::ProviderFailure {
            provider: self.name.clone(),
            detail: format!("after {} attempt(s): {last_err}", self.max_retries + 1),
            failed_ids: requests.iter().map(|r| r.doc_id.clone()).collect(),
        })
    }
}
