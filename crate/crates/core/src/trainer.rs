//! Contrastive training of the linear adapter.
//!
//! Each minibatch holds accepted (resume, job) pairs. For every pair the
//! loss is computed in both directions: the resume must pick its job out
//! of the other in-batch jobs plus any mined hard negatives, and the job
//! must pick its resume the same way. Scores are temperature-scaled
//! cosines after the adapter projection; the per-direction loss is cross
//! entropy of the positive against that candidate set, and the batch loss
//! is the mean over pairs of the two directions' sum.
//!
//! Gradients are computed analytically. With `u = W a`, `v = W b`,
//! unit vectors `û`, `v̂`, cosine `c = ûᵀv̂`, and score `s = c/T`:
//!
//! ```text
//! ∂s/∂W = (1/T) [ (v̂ - c·û) aᵀ / ‖u‖  +  (û - c·v̂) bᵀ / ‖v‖ ]
//! ```
//!
//! and the cross-entropy factor per candidate is `softmax(s)_k - [k = +]`.
//! The log-sum-exp subtracts the max and uses `ln_1p` when the positive is
//! the max, which keeps the loss exact even at low temperatures where the
//! logits saturate.
//!
//! The optimizer is plain Adam. Training runs from the provided adapter
//! (identity in the usual pipeline), optionally early-stopping on a fixed
//! validation ranking task — the returned weights are the best validation
//! epoch's, not the last. The iterative driver alternates runner-up mining
//! with retraining from identity, which lets each round's negatives be
//! chosen by an adapter that never saw them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapter::AdapterParams;
use crate::corpus::{LabelSet, Split};
use crate::embedder::EmbeddingStore;
use crate::error::{Error, Result};
use crate::evalreport::{evaluate, EvalTask, MetricsReport};
use crate::miner::{runner_up_mine, HardNegativeSet, MineDirection, MineStrategy, PercentileRange};
use crate::seeding::rng_stream_for;

// ======================================================
// Configuration
// ======================================================

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Pairs per minibatch. When more pairs than this are available, only
    /// full batches are used each epoch; with fewer, one small batch runs.
    pub batch_size: usize,
    /// Mined negatives attached per pair and direction (ignored when no
    /// mined set is supplied).
    pub hard_negatives_per_pair: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub shuffle: bool,
    pub seed: u64,
    /// Consecutive epochs without validation improvement before stopping.
    /// Only used when a validation task is supplied.
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 4,
            hard_negatives_per_pair: 2,
            learning_rate: 1e-5,
            epochs: 30,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            shuffle: true,
            seed: 0,
            early_stop_patience: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, detail: &str| {
            Err(Error::InvalidParam { name: name.into(), detail: detail.into() })
        };
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return bad("adam_beta1", "must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam_beta2", "must be in [0, 1)");
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon > 0.0) {
            return bad("adam_epsilon", "must be positive and finite");
        }
        if self.early_stop_patience == 0 {
            return bad("early_stop_patience", "must be positive");
        }
        Ok(())
    }
}

// ======================================================
// Loss and gradient
// ======================================================

/// One minibatch: accepted pairs plus per-pair mined negatives for each
/// direction (`extra_jobs[i]` are job negatives for the i-th resume,
/// `extra_resumes[i]` resume negatives for the i-th job). The extra lists
/// must align with `pairs` and may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub pairs: Vec<(String, String)>,
    pub extra_jobs: Vec<Vec<String>>,
    pub extra_resumes: Vec<Vec<String>>,
}

impl TrainBatch {
    /// A batch with in-batch negatives only.
    pub fn in_batch(pairs: Vec<(String, String)>) -> TrainBatch {
        let n = pairs.len();
        TrainBatch { pairs, extra_jobs: vec![Vec::new(); n], extra_resumes: vec![Vec::new(); n] }
    }

    fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if self.extra_jobs.len() != self.pairs.len() || self.extra_resumes.len() != self.pairs.len()
        {
            return Err(Error::Invalid {
                detail: format!(
                    "extras misaligned: {} pairs, {} job lists, {} resume lists",
                    self.pairs.len(),
                    self.extra_jobs.len(),
                    self.extra_resumes.len()
                ),
            });
        }
        for (i, (resume_id, job_id)) in self.pairs.iter().enumerate() {
            for (side, extras, positive) in [
                ("job", &self.extra_jobs[i], job_id),
                ("resume", &self.extra_resumes[i], resume_id),
            ] {
                let mut seen = BTreeSet::new();
                for id in extras {
                    if id == positive {
                        return Err(Error::Invalid {
                            detail: format!(
                                "extra {side} negative {id:?} equals the positive for pair ({resume_id:?}, {job_id:?})"
                            ),
                        });
                    }
                    if !seen.insert(id) {
                        return Err(Error::Invalid {
                            detail: format!(
                                "duplicate extra {side} negative {id:?} for pair ({resume_id:?}, {job_id:?})"
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// A document after projection: raw input, projected vector's norm, and
/// the projected unit vector.
struct Projected {
    raw: Vec<f64>,
    norm: f64,
    unit: Vec<f64>,
}

fn project_all<'a, I>(ids: I, store: &EmbeddingStore, adapter: &AdapterParams) -> Result<BTreeMap<String, Projected>>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = BTreeMap::new();
    for id in ids {
        if out.contains_key(id) {
            continue;
        }
        let raw = store.vector(id)?.to_vec();
        let u = adapter.project_raw(&raw)?;
        let norm_sq: f64 = u.iter().map(|x| x * x).sum();
        let norm = norm_sq.sqrt();
        if !norm.is_finite() {
            return Err(Error::NonFinite { context: format!("projected norm for {id:?}") });
        }
        if norm == 0.0 {
            return Err(Error::ZeroVector { context: format!("projection of {id:?}") });
        }
        let unit = u.iter().map(|x| x / norm).collect();
        out.insert(id.to_string(), Projected { raw, norm, unit });
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Accumulate `coeff * x yᵀ` into a row-major matrix.
fn add_outer(grad: &mut [f64], dim: usize, coeff: f64, x: &[f64], y: &[f64]) {
    for p in 0..dim {
        let cx = coeff * x[p];
        let row = &mut grad[p * dim..(p + 1) * dim];
        for (g, yq) in row.iter_mut().zip(y) {
            *g += cx * yq;
        }
    }
}

/// Cross-entropy of the positive (index 0 of `candidates`) against all
/// candidates, with the gradient of the whole term accumulated into
/// `grad`, scaled by `scale`.
fn softmax_direction(
    anchor: &Projected,
    candidates: &[&Projected],
    temperature: f64,
    scale: f64,
    dim: usize,
    grad: &mut [f64],
) -> f64 {
    let cosines: Vec<f64> = candidates.iter().map(|c| dot(&anchor.unit, &c.unit)).collect();
    let logits: Vec<f64> = cosines.iter().map(|c| c / temperature).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = if logits[0] == max {
        let rest: f64 = exps.iter().skip(1).sum();
        rest.ln_1p()
    } else {
        max - logits[0] + sum.ln()
    };

    for (k, cand) in candidates.iter().enumerate() {
        let p = exps[k] / sum;
        let indicator = if k == 0 { 1.0 } else { 0.0 };
        let coeff = scale * (p - indicator) / temperature;
        if coeff == 0.0 {
            continue;
        }
        let c = cosines[k];
        // (v̂ - c·û)/‖u‖ against the anchor's raw input...
        let x: Vec<f64> = cand
            .unit
            .iter()
            .zip(&anchor.unit)
            .map(|(v, u)| (v - c * u) / anchor.norm)
            .collect();
        add_outer(grad, dim, coeff, &x, &anchor.raw);
        // ...and (û - c·v̂)/‖v‖ against the candidate's.
        let y: Vec<f64> = anchor
            .unit
            .iter()
            .zip(&cand.unit)
            .map(|(u, v)| (u - c * v) / cand.norm)
            .collect();
        add_outer(grad, dim, coeff, &y, &cand.raw);
    }
    loss
}

/// Batch loss and its gradient with respect to the adapter weights
/// (row-major, same layout as [`AdapterParams::weights`]).
///
/// For the i-th pair, the resume's candidate jobs are its own job, the
/// other in-batch jobs (skipping any that duplicate its own), and its
/// extra job negatives; symmetrically for the job side. A pair whose
/// candidate sets are bare positives in both directions has nothing to
/// contrast and is an error.
pub fn contrastive_loss(
    batch: &TrainBatch,
    store: &EmbeddingStore,
    adapter: &AdapterParams,
) -> Result<(f64, Vec<f64>)> {
    batch.validate()?;
    let dim = adapter.dim();
    let all_ids = batch
        .pairs
        .iter()
        .flat_map(|(r, j)| [r.as_str(), j.as_str()])
        .chain(batch.extra_jobs.iter().flatten().map(String::as_str))
        .chain(batch.extra_resumes.iter().flatten().map(String::as_str));
    let projected = project_all(all_ids, store, adapter)?;

    let n_pairs = batch.pairs.len();
    let scale = 1.0 / n_pairs as f64;
    let mut grad = vec![0.0; dim * dim];
    let mut loss = 0.0;
    for (i, (resume_id, job_id)) in batch.pairs.iter().enumerate() {
        let mut job_candidates: Vec<&str> = vec![job_id];
        for (k, (_, other_job)) in batch.pairs.iter().enumerate() {
            if k != i && other_job != job_id && !job_candidates.contains(&other_job.as_str()) {
                job_candidates.push(other_job);
            }
        }
        for extra in &batch.extra_jobs[i] {
            if !job_candidates.contains(&extra.as_str()) {
                job_candidates.push(extra);
            }
        }
        let mut resume_candidates: Vec<&str> = vec![resume_id];
        for (k, (other_resume, _)) in batch.pairs.iter().enumerate() {
            if k != i && other_resume != resume_id && !resume_candidates.contains(&other_resume.as_str()) {
                resume_candidates.push(other_resume);
            }
        }
        for extra in &batch.extra_resumes[i] {
            if !resume_candidates.contains(&extra.as_str()) {
                resume_candidates.push(extra);
            }
        }
        if job_candidates.len() == 1 && resume_candidates.len() == 1 {
            return Err(Error::NoNegatives {
                resume_id: resume_id.clone(),
                job_id: job_id.clone(),
            });
        }

        let resume = &projected[resume_id.as_str()];
        let job = &projected[job_id.as_str()];
        let jobs: Vec<&Projected> = job_candidates.iter().map(|id| &projected[*id]).collect();
        loss += scale
            * softmax_direction(resume, &jobs, adapter.temperature(), scale, dim, &mut grad);
        let resumes: Vec<&Projected> =
            resume_candidates.iter().map(|id| &projected[*id]).collect();
        loss += scale
            * softmax_direction(job, &resumes, adapter.temperature(), scale, dim, &mut grad);
    }
    Ok((loss, grad))
}

// ======================================================
// Optimizer
// ======================================================

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, config: &TrainConfig) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_epsilon,
        }
    }

    fn step(&mut self, weights: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bias1 = 1.0 - self.beta1.powi(self.t);
        let bias2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..weights.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            weights[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

// ======================================================
// Training loop
// ======================================================

/// One epoch's summary in the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub n_batches: usize,
    pub mean_loss: f64,
    pub valid_ndcg: Option<f64>,
}

/// The trained adapter plus the run's log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub adapter: AdapterParams,
    pub epochs_run: usize,
    /// Epoch whose weights are returned (1-based); `None` when no
    /// validation task was supplied, in which case the last weights are
    /// returned.
    pub best_epoch: Option<usize>,
    pub log: Vec<EpochLog>,
}

fn epoch_batches(
    pairs: &[(String, String)],
    config: &TrainConfig,
    epoch: usize,
    job_negatives: Option<&HardNegativeSet>,
    resume_negatives: Option<&HardNegativeSet>,
) -> Result<Vec<TrainBatch>> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    if config.shuffle {
        use rand::seq::SliceRandom;
        let mut rng = rng_stream_for(config.seed, "train-shuffle", &format!("epoch-{epoch}"));
        order.shuffle(&mut rng);
    }
    let mut batches = Vec::new();
    let chunk = config.batch_size.min(pairs.len());
    for indices in order.chunks(chunk) {
        if indices.len() < chunk {
            // Only full batches: a ragged tail would change the contrastive
            // task difficulty from batch to batch.
            continue;
        }
        let selected: Vec<(String, String)> = indices.iter().map(|&i| pairs[i].clone()).collect();
        let limit = config.hard_negatives_per_pair;
        let extra_jobs: Vec<Vec<String>> = selected
            .iter()
            .map(|(r, j)| {
                job_negatives
                    .map(|set| {
                        set.ids_for(r, limit).into_iter().filter(|id| id != j).collect()
                    })
                    .unwrap_or_default()
            })
            .collect();
        let extra_resumes: Vec<Vec<String>> = selected
            .iter()
            .map(|(r, j)| {
                resume_negatives
                    .map(|set| {
                        set.ids_for(j, limit).into_iter().filter(|id| id != r).collect()
                    })
                    .unwrap_or_default()
            })
            .collect();
        batches.push(TrainBatch { pairs: selected, extra_jobs, extra_resumes });
    }
    Ok(batches)
}

fn check_negative_direction(
    set: Option<&HardNegativeSet>,
    expected: MineDirection,
    name: &str,
) -> Result<()> {
    if let Some(set) = set {
        if set.direction != expected {
            return Err(Error::InvalidParam {
                name: name.into(),
                detail: format!("mined with direction {}, expected {expected}", set.direction),
            });
        }
    }
    Ok(())
}

/// Train the adapter on accepted pairs starting from `init`.
///
/// `job_negatives` attaches mined job negatives to resume anchors and
/// `resume_negatives` the reverse; either may be absent, leaving in-batch
/// negatives only. With a validation task, each epoch is scored by nDCG@k
/// and training stops after `early_stop_patience` epochs without
/// improvement, returning the best epoch's weights.
pub fn train_adapter(
    config: &TrainConfig,
    init: &AdapterParams,
    pairs: &[(String, String)],
    store: &EmbeddingStore,
    job_negatives: Option<&HardNegativeSet>,
    resume_negatives: Option<&HardNegativeSet>,
    valid_task: Option<&EvalTask>,
) -> Result<TrainResult> {
    config.validate()?;
    check_negative_direction(job_negatives, MineDirection::JobsForResumes, "job_negatives")?;
    check_negative_direction(resume_negatives, MineDirection::ResumesForJobs, "resume_negatives")?;
    if pairs.is_empty() {
        return Err(Error::InvalidParam {
            name: "pairs".into(),
            detail: "no accepted pairs to train on".into(),
        });
    }
    if let Some(task) = valid_task {
        task.validate()?;
    }

    let dim = init.dim();
    let mut weights = init.weights().to_vec();
    let mut adam = Adam::new(weights.len(), config);
    let mut log = Vec::new();
    let mut best_weights = weights.clone();
    let mut best_ndcg = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs_run = 0usize;

    for epoch in 1..=config.epochs {
        epochs_run = epoch;
        let batches = epoch_batches(pairs, config, epoch, job_negatives, resume_negatives)?;
        let mut loss_sum = 0.0;
        let n_batches = batches.len();
        for (step, batch) in batches.iter().enumerate() {
            let adapter =
                AdapterParams::from_weights(weights.clone(), dim, init.temperature(), init.seed())?;
            let (loss, grad) = contrastive_loss(batch, store, &adapter)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step: step + 1 });
            }
            adam.step(&mut weights, &grad);
            loss_sum += loss;
        }
        let mean_loss = loss_sum / n_batches as f64;

        let valid_ndcg = match valid_task {
            Some(task) => {
                let adapter = AdapterParams::from_weights(
                    weights.clone(),
                    dim,
                    init.temperature(),
                    init.seed(),
                )?;
                let (report, _) = evaluate(task, store, &adapter)?;
                Some(report.ndcg_at_k)
            }
            None => None,
        };
        log.push(EpochLog { epoch, n_batches, mean_loss, valid_ndcg });

        if let Some(ndcg) = valid_ndcg {
            if ndcg > best_ndcg {
                best_ndcg = ndcg;
                best_epoch = epoch;
                best_weights = weights.clone();
            } else if epoch - best_epoch >= config.early_stop_patience {
                break;
            }
        }
    }

    let (final_weights, best_epoch) = if valid_task.is_some() && best_epoch > 0 {
        (best_weights, Some(best_epoch))
    } else {
        (weights, None)
    };
    Ok(TrainResult {
        adapter: AdapterParams::from_weights(final_weights, dim, init.temperature(), init.seed())?,
        epochs_run,
        best_epoch,
        log,
    })
}

// ======================================================
// Iterative mining-and-retraining
// ======================================================

/// Configuration for alternating mining and retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeConfig {
    pub train: TrainConfig,
    /// Total rounds including the first, in-batch-only one.
    pub iterations: usize,
    pub range: PercentileRange,
    pub n_per_anchor: usize,
    /// Experimental: warm-start each round from the previous round's
    /// weights instead of identity.
    pub continue_from_previous: bool,
}

/// One round's outputs.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub iteration: usize,
    pub adapter: AdapterParams,
    pub valid: MetricsReport,
    pub log: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    /// The mined sets used this round (absent for round 1).
    pub job_negatives: Option<HardNegativeSet>,
    pub resume_negatives: Option<HardNegativeSet>,
}

/// Alternate training with runner-up mining. Round 1 trains from identity
/// with in-batch negatives only. Each later round mines hard negatives in
/// both directions with the previous round's adapter, then retrains —
/// from identity again unless `continue_from_previous` is set. Every
/// round is scored on the validation task.
pub fn train_iterative(
    config: &IterativeConfig,
    store: &EmbeddingStore,
    labels: &LabelSet,
    resume_pool: &[String],
    job_pool: &[String],
    valid_task: &EvalTask,
    temperature: f64,
) -> Result<Vec<IterationOutcome>> {
    if config.iterations == 0 {
        return Err(Error::InvalidParam {
            name: "iterations".into(),
            detail: "must be positive".into(),
        });
    }
    let pairs = labels.positive_pairs(Split::Train);
    if pairs.is_empty() {
        return Err(Error::InvalidParam {
            name: "labels".into(),
            detail: "no accepted training pairs".into(),
        });
    }
    let anchor_resumes: Vec<String> = {
        let set: BTreeSet<&String> = pairs.iter().map(|(r, _)| r).collect();
        set.into_iter().cloned().collect()
    };
    let anchor_jobs: Vec<String> = {
        let set: BTreeSet<&String> = pairs.iter().map(|(_, j)| j).collect();
        set.into_iter().cloned().collect()
    };

    let identity = AdapterParams::identity(store.dim(), temperature, config.train.seed)?;
    let mut outcomes: Vec<IterationOutcome> = Vec::new();
    for iteration in 1..=config.iterations {
        let (job_negatives, resume_negatives) = if iteration == 1 {
            (None, None)
        } else {
            let previous = &outcomes.last().expect("previous iteration").adapter;
            let jobs = runner_up_mine(
                &anchor_resumes,
                job_pool,
                store,
                previous,
                labels,
                MineDirection::JobsForResumes,
                config.range,
                config.n_per_anchor,
                config.train.seed,
            )?;
            let resumes = runner_up_mine(
                &anchor_jobs,
                resume_pool,
                store,
                previous,
                labels,
                MineDirection::ResumesForJobs,
                config.range,
                config.n_per_anchor,
                config.train.seed,
            )?;
            (Some(jobs), Some(resumes))
        };

        let init = if config.continue_from_previous && !outcomes.is_empty() {
            outcomes.last().expect("previous iteration").adapter.clone()
        } else {
            identity.clone()
        };
        let result = train_adapter(
            &config.train,
            &init,
            &pairs,
            store,
            job_negatives.as_ref(),
            resume_negatives.as_ref(),
            Some(valid_task),
        )?;
        let (valid, _) = evaluate(valid_task, store, &result.adapter)?;
        outcomes.push(IterationOutcome {
            iteration,
            adapter: result.adapter,
            valid,
            log: result.log,
            best_epoch: result.best_epoch,
            job_negatives,
            resume_negatives,
        });
    }
    Ok(outcomes)
}

// ======================================================
// Checkpoints
// ======================================================

/// Where a checkpoint's weights came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CheckpointProvenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<MineStrategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
}

/// A saved adapter: weights as nested rows plus the training setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterCheckpoint {
    pub dim: usize,
    pub temperature: f64,
    pub seed: u64,
    pub w: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
    #[serde(default)]
    pub provenance: CheckpointProvenance,
}

impl AdapterCheckpoint {
    pub fn from_adapter(
        adapter: &AdapterParams,
        train_config: Option<TrainConfig>,
        provenance: CheckpointProvenance,
    ) -> AdapterCheckpoint {
        let dim = adapter.dim();
        let w = (0..dim)
            .map(|r| adapter.weights()[r * dim..(r + 1) * dim].to_vec())
            .collect();
        AdapterCheckpoint {
            dim,
            temperature: adapter.temperature(),
            seed: adapter.seed(),
            w,
            train_config,
            provenance,
        }
    }

    pub fn to_adapter(&self) -> Result<AdapterParams> {
        for row in &self.w {
            if row.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    context: "checkpoint weight row".into(),
                    expected: self.dim,
                    got: row.len(),
                });
            }
        }
        let flat: Vec<f64> = self.w.iter().flatten().copied().collect();
        AdapterParams::from_weights(flat, self.dim, self.temperature, self.seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invalid { detail: format!("serializing checkpoint: {e}") })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<AdapterCheckpoint> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let checkpoint: AdapterCheckpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Invalid { detail: format!("parsing {}: {e}", path.display()) })?;
        checkpoint.to_adapter()?; // validate shape before handing it back
        Ok(checkpoint)
    }
}
