//! Seeded synthetic corpus generation.
//!
//! Each synthetic document carries a hidden unit-length latent vector. A
//! resume and a job are compatible exactly when their latent cosine clears
//! `accept_threshold`. The latent coordinates are also written into the
//! document text as quantized coordinate tokens, so both lexical overlap and
//! (decoded) dense similarity carry signal about compatibility. Labels are a
//! uniform sample of all pairs with optional flip noise, split 80/10/10 into
//! train/valid/test.
//!
//! Everything is driven by tagged ChaCha streams derived from `seed`: the
//! same spec always produces byte-identical documents, labels, and ground
//! truth.

use std::collections::BTreeMap;

use rand::distributions::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocKind, Document, LabelEntry, LabelSet, Split};
use crate::error::{Error, Result};
use crate::seeding::rng_stream;

/// Number of quantization buckets per latent dimension used when rendering
/// coordinates as text tokens.
pub const TOKENS_PER_DIM: usize = 32;

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_resumes: usize,
    pub n_jobs: usize,
    pub latent_dim: usize,
    /// Fraction of all (resume, job) pairs that receive a label, in (0, 1].
    pub label_density: f64,
    /// Latent cosine at or above which a pair is compatible.
    pub accept_threshold: f64,
    /// Label flip noise; the flip rate is `min(0.5, noise_sigma)`.
    #[serde(default)]
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Full compatibility ground truth for a synthetic corpus, including the
/// latent cosine of every (resume, job) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GroundTruthRaw", into = "GroundTruthRaw")]
pub struct GroundTruth {
    resume_ids: Vec<String>,
    job_ids: Vec<String>,
    cosine: Vec<f64>,
    compatible: Vec<bool>,
    #[allow(clippy::type_complexity)]
    r_index: BTreeMap<String, usize>,
    j_index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthRaw {
    resume_ids: Vec<String>,
    job_ids: Vec<String>,
    cosine: Vec<f64>,
    compatible: Vec<bool>,
}

impl From<GroundTruthRaw> for GroundTruth {
    fn from(raw: GroundTruthRaw) -> Self {
        GroundTruth::from_parts(raw.resume_ids, raw.job_ids, raw.cosine, raw.compatible)
    }
}

impl From<GroundTruth> for GroundTruthRaw {
    fn from(gt: GroundTruth) -> Self {
        GroundTruthRaw {
            resume_ids: gt.resume_ids,
            job_ids: gt.job_ids,
            cosine: gt.cosine,
            compatible: gt.compatible,
        }
    }
}

impl GroundTruth {
    fn from_parts(
        resume_ids: Vec<String>,
        job_ids: Vec<String>,
        cosine: Vec<f64>,
        compatible: Vec<bool>,
    ) -> Self {
        let r_index = resume_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let j_index = job_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        GroundTruth { resume_ids, job_ids, cosine, compatible, r_index, j_index }
    }

    pub fn resume_ids(&self) -> &[String] {
        &self.resume_ids
    }

    pub fn job_ids(&self) -> &[String] {
        &self.job_ids
    }

    fn pair_index(&self, resume_id: &str, job_id: &str) -> Result<usize> {
        let ri = self
            .r_index
            .get(resume_id)
            .ok_or_else(|| Error::MissingGroundTruth { id: resume_id.to_string() })?;
        let ji = self
            .j_index
            .get(job_id)
            .ok_or_else(|| Error::MissingGroundTruth { id: job_id.to_string() })?;
        Ok(ri * self.job_ids.len() + ji)
    }

    /// Latent cosine of a pair.
    pub fn cosine(&self, resume_id: &str, job_id: &str) -> Result<f64> {
        Ok(self.cosine[self.pair_index(resume_id, job_id)?])
    }

    /// True compatibility of a pair.
    pub fn is_compatible(&self, resume_id: &str, job_id: &str) -> Result<bool> {
        Ok(self.compatible[self.pair_index(resume_id, job_id)?])
    }

    /// Nearest-rank percentile of all pairwise latent cosines; `pct` in
    /// [0, 100]. Useful for choosing an accept threshold that makes a target
    /// fraction of pairs compatible.
    pub fn cosine_percentile(&self, pct: f64) -> f64 {
        let mut sorted = self.cosine.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = ((pct / 100.0) * n as f64).ceil() as usize;
        sorted[rank.clamp(1, n) - 1]
    }

    /// Fraction of all pairs that are compatible.
    pub fn compatible_fraction(&self) -> f64 {
        let n = self.compatible.len();
        if n == 0 {
            return 0.0;
        }
        self.compatible.iter().filter(|c| **c).count() as f64 / n as f64
    }
}

/// A generated corpus: documents, sampled labels, and full ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub labels: LabelSet,
    pub ground_truth: GroundTruth,
}

fn unit_latent<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Render a latent vector as quantized coordinate tokens, one per dimension.
/// Token `t<d>_<b>` says that coordinate `d` falls in bucket `b` of
/// [`TOKENS_PER_DIM`] equal slices of [-1, 1].
pub fn coordinate_tokens(latent: &[f64]) -> String {
    let mut parts = Vec::with_capacity(latent.len());
    for (d, x) in latent.iter().enumerate() {
        let b = (((x + 1.0) / 2.0) * TOKENS_PER_DIM as f64).floor() as i64;
        let b = b.clamp(0, TOKENS_PER_DIM as i64 - 1);
        parts.push(format!("t{d}_{b:02}"));
    }
    parts.join(" ")
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Generate a corpus from `spec`. Deterministic: the same spec yields
/// byte-identical output.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.n_resumes == 0 || spec.n_jobs == 0 {
        return Err(Error::InvalidParam {
            name: "n_resumes/n_jobs".into(),
            detail: "must be positive".into(),
        });
    }
    if spec.latent_dim == 0 {
        return Err(Error::InvalidParam {
            name: "latent_dim".into(),
            detail: "must be positive".into(),
        });
    }
    if !(spec.label_density > 0.0 && spec.label_density <= 1.0) {
        return Err(Error::InvalidParam {
            name: "label_density".into(),
            detail: format!("must lie in (0, 1], got {}", spec.label_density),
        });
    }
    if !spec.noise_sigma.is_finite() || spec.noise_sigma < 0.0 {
        return Err(Error::InvalidParam {
            name: "noise_sigma".into(),
            detail: format!("must be finite and non-negative, got {}", spec.noise_sigma),
        });
    }

    let mut latent_rng = rng_stream(spec.seed, "synthetic-latents");
    let resume_latents: Vec<Vec<f64>> =
        (0..spec.n_resumes).map(|_| unit_latent(&mut latent_rng, spec.latent_dim)).collect();
    let job_latents: Vec<Vec<f64>> =
        (0..spec.n_jobs).map(|_| unit_latent(&mut latent_rng, spec.latent_dim)).collect();

    let resume_ids: Vec<String> = (0..spec.n_resumes).map(|i| format!("r{i:04}")).collect();
    let job_ids: Vec<String> = (0..spec.n_jobs).map(|j| format!("j{j:04}")).collect();

    let mut documents = Vec::with_capacity(spec.n_resumes + spec.n_jobs);
    for (id, latent) in resume_ids.iter().zip(&resume_latents) {
        documents.push(Document::new(
            id.clone(),
            DocKind::Resume,
            vec![("summary".to_string(), coordinate_tokens(latent))],
        ));
    }
    for (id, latent) in job_ids.iter().zip(&job_latents) {
        documents.push(Document::new(
            id.clone(),
            DocKind::Job,
            vec![("requirements".to_string(), coordinate_tokens(latent))],
        ));
    }

    let n_jobs = spec.n_jobs;
    let total = spec.n_resumes * n_jobs;
    let mut cos = Vec::with_capacity(total);
    let mut compatible = Vec::with_capacity(total);
    for r in &resume_latents {
        for j in &job_latents {
            let c = cosine(r, j);
            cos.push(c);
            compatible.push(c >= spec.accept_threshold);
        }
    }

    // Exact-count pair sample so the labeled fraction matches the density to
    // within one pair.
    let n_labeled = ((spec.label_density * total as f64).round() as usize).clamp(1, total);
    let mut label_rng = rng_stream(spec.seed, "synthetic-labels");
    let mut picked = rand::seq::index::sample(&mut label_rng, total, n_labeled).into_vec();
    picked.sort_unstable();

    let mut split_order = picked.clone();
    split_order.shuffle(&mut rng_stream(spec.seed, "synthetic-splits"));
    let n_train = n_labeled * 8 / 10;
    let n_valid = n_labeled / 10;
    let mut split_of: BTreeMap<usize, Split> = BTreeMap::new();
    for (pos, idx) in split_order.iter().enumerate() {
        let split = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
        split_of.insert(*idx, split);
    }

    let flip_rate = spec.noise_sigma.min(0.5);
    let mut flip_rng = rng_stream(spec.seed, "synthetic-flips");
    let mut entries = Vec::with_capacity(n_labeled);
    for idx in picked {
        let truth = compatible[idx];
        let flip = flip_rate > 0.0 && flip_rng.gen_bool(flip_rate);
        let label = u8::from(truth != flip);
        entries.push(LabelEntry {
            resume_id: resume_ids[idx / n_jobs].clone(),
            job_id: job_ids[idx % n_jobs].clone(),
            label,
            split: split_of[&idx],
        });
    }

    Ok(SyntheticCorpus {
        documents,
        labels: LabelSet::new(entries)?,
        ground_truth: GroundTruth::from_parts(resume_ids, job_ids, cos, compatible),
    })
}
