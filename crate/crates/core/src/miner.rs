//! Hard-negative mining.
//!
//! The main strategy mines "runner-up" negatives: for each anchor, rank all
//! eligible candidates by the current scorer, then sample from a fixed
//! percentile band below the very top. The top ranks are skipped on purpose:
//! with sparse labels they are dense in false negatives, i.e. candidates
//! that are actually compatible but happen to be unlabeled. A band a few
//! percent down keeps the negatives hard while cutting that contamination.
//!
//! Baseline strategies (lexical top-k, labeled rejections, uniform random)
//! share the same output shape so training can consume any of them.
//!
//! Percentile-to-rank mapping: with `M` eligible candidates and a band
//! `(lo, hi]` in percent, the eligible 1-based ranks are
//! `floor(lo*M/100) < rank <= floor(hi*M/100)`. Adjacent one-point bands
//! therefore tile the rank list exactly. Sampling inside the band is
//! uniform without replacement, from a stream seeded by (run seed, anchor
//! id), so results do not depend on anchor iteration order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapter::AdapterParams;
use crate::corpus::synthetic::GroundTruth;
use crate::corpus::LabelSet;
use crate::embedder::EmbeddingStore;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::scorer::bm25::{Bm25Index, Bm25Params};
use crate::scorer::{score_matrix, ScoreMatrix};
use crate::seeding::rng_stream_for;

// ======================================================
// Shared types
// ======================================================

/// Which side mined candidates come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MineDirection {
    /// Anchors are resumes; negatives are jobs.
    JobsForResumes,
    /// Anchors are jobs; negatives are resumes.
    ResumesForJobs,
}

impl fmt::Display for MineDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MineDirection::JobsForResumes => write!(f, "jobs_for_resumes"),
            MineDirection::ResumesForJobs => write!(f, "resumes_for_jobs"),
        }
    }
}

/// Mining strategy tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MineStrategy {
    RunnerUp,
    Bm25TopK,
    Rejected,
    Random,
}

impl fmt::Display for MineStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MineStrategy::RunnerUp => write!(f, "runner_up"),
            MineStrategy::Bm25TopK => write!(f, "bm25_topk"),
            MineStrategy::Rejected => write!(f, "rejected"),
            MineStrategy::Random => write!(f, "random"),
        }
    }
}

/// A percentile band `(lo, hi]` in percent, `0 <= lo < hi <= 100`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileRange {
    pub lo: f64,
    pub hi: f64,
}

impl PercentileRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && (0.0..=100.0).contains(&lo) && hi <= 100.0 && lo < hi)
        {
            return Err(Error::InvalidRange { lo, hi });
        }
        Ok(PercentileRange { lo, hi })
    }

    /// Half-open 1-based rank interval `(lo_rank, hi_rank]` over `eligible`
    /// candidates.
    pub fn rank_interval(&self, eligible: usize) -> (usize, usize) {
        let m = eligible as f64;
        let lo_rank = (self.lo * m / 100.0).floor() as usize;
        let hi_rank = (self.hi * m / 100.0).floor() as usize;
        (lo_rank, hi_rank)
    }
}

impl Default for PercentileRange {
    /// The band used throughout: skip the top 3%, sample from (3%, 4%].
    fn default() -> Self {
        PercentileRange { lo: 3.0, hi: 4.0 }
    }
}

/// One mined negative. `score` and `rank` record the scorer's view at
/// mining time when the strategy has one (rank is 1-based over the
/// anchor's eligible candidates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedNegative {
    pub id: String,
    pub score: Option<f64>,
    pub rank: Option<usize>,
}

/// Mined negatives for a set of anchors, one list per anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct HardNegativeSet {
    pub direction: MineDirection,
    pub strategy: MineStrategy,
    pub range: Option<PercentileRange>,
    pub seed: Option<u64>,
    negatives: BTreeMap<String, Vec<MinedNegative>>,
    /// Anchors that received fewer negatives than requested.
    pub warnings: Vec<String>,
}

impl HardNegativeSet {
    pub fn new(
        direction: MineDirection,
        strategy: MineStrategy,
        range: Option<PercentileRange>,
        seed: Option<u64>,
    ) -> Self {
        HardNegativeSet {
            direction,
            strategy,
            range,
            seed,
            negatives: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    /// Add an anchor's list, rejecting duplicates within the list and the
    /// anchor appearing as its own negative.
    pub fn insert_anchor(&mut self, anchor_id: &str, negatives: Vec<MinedNegative>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for n in &negatives {
            if n.id == anchor_id {
                return Err(Error::Invalid {
                    detail: format!("anchor {anchor_id:?} mined as its own negative"),
                });
            }
            if !seen.insert(n.id.clone()) {
                return Err(Error::Invalid {
                    detail: format!("duplicate negative {:?} for anchor {anchor_id:?}", n.id),
                });
            }
        }
        if self.negatives.insert(anchor_id.to_string(), negatives).is_some() {
            return Err(Error::Invalid {
                detail: format!("anchor {anchor_id:?} mined twice"),
            });
        }
        Ok(())
    }

    pub fn anchors(&self) -> impl Iterator<Item = &String> {
        self.negatives.keys()
    }

    pub fn get(&self, anchor_id: &str) -> Option<&[MinedNegative]> {
        self.negatives.get(anchor_id).map(|v| v.as_slice())
    }

    /// Negative ids for an anchor, capped at `limit`.
    pub fn ids_for(&self, anchor_id: &str, limit: usize) -> Vec<String> {
        self.get(anchor_id)
            .map(|v| v.iter().take(limit).map(|n| n.id.clone()).collect())
            .unwrap_or_default()
    }

    pub fn n_anchors(&self) -> usize {
        self.negatives.len()
    }

    pub fn total_negatives(&self) -> usize {
        self.negatives.values().map(Vec::len).sum()
    }

    /// Write one JSONL row per anchor.
    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_jsonl(path, &self.rows())
    }

    /// Read a set saved by [`HardNegativeSet::save`]. Rows must agree on
    /// direction, strategy, range, and seed.
    pub fn load(path: &Path) -> Result<HardNegativeSet> {
        let rows: Vec<NegativesRow> = jsonl::read_jsonl(path)?;
        let first = rows.first().ok_or_else(|| Error::Invalid {
            detail: format!("no mined negatives in {}", path.display()),
        })?;
        let range = match first.range {
            Some([lo, hi]) => Some(PercentileRange::new(lo, hi)?),
            None => None,
        };
        let mut set = HardNegativeSet::new(first.direction, first.strategy, range, first.seed);
        for row in &rows {
            if row.direction != first.direction
                || row.strategy != first.strategy
                || row.range != first.range
                || row.seed != first.seed
            {
                return Err(Error::Invalid {
                    detail: format!(
                        "anchor {:?} disagrees with the file header on direction/strategy/range/seed",
                        row.anchor_id
                    ),
                });
            }
            set.insert_anchor(&row.anchor_id, row.negatives.clone())?;
        }
        Ok(set)
    }
}

#[derive(Serialize, Deserialize)]
struct NegativesRow {
    anchor_id: String,
    direction: MineDirection,
    strategy: MineStrategy,
    range: Option<[f64; 2]>,
    seed: Option<u64>,
    negatives: Vec<MinedNegative>,
}

impl HardNegativeSet {
    fn rows(&self) -> Vec<NegativesRow> {
        self.negatives
            .iter()
            .map(|(anchor_id, negatives)| NegativesRow {
                anchor_id: anchor_id.clone(),
                direction: self.direction,
                strategy: self.strategy,
                range: self.range.map(|r| [r.lo, r.hi]),
                seed: self.seed,
                negatives: negatives.clone(),
            })
            .collect()
    }
}

/// Write several sets into one file; rows keep their per-set metadata, so
/// sets mined in different directions can share an artifact.
pub fn save_combined(path: &Path, sets: &[&HardNegativeSet]) -> Result<()> {
    let rows: Vec<NegativesRow> = sets.iter().flat_map(|s| s.rows()).collect();
    if rows.is_empty() {
        return Err(Error::Invalid { detail: "no mined negatives to save".into() });
    }
    jsonl::write_jsonl(path, &rows)
}

/// Read a combined file back, grouping rows by (direction, strategy,
/// range, seed) in first-appearance order.
pub fn load_combined(path: &Path) -> Result<Vec<HardNegativeSet>> {
    let rows: Vec<NegativesRow> = jsonl::read_jsonl(path)?;
    if rows.is_empty() {
        return Err(Error::Invalid {
            detail: format!("no mined negatives in {}", path.display()),
        });
    }
    let mut sets: Vec<HardNegativeSet> = Vec::new();
    for row in rows {
        let key = (row.direction, row.strategy, row.range.map(|r| (r[0].to_bits(), r[1].to_bits())), row.seed);
        let existing = sets.iter_mut().find(|s| {
            (s.direction, s.strategy, s.range.map(|r| (r.lo.to_bits(), r.hi.to_bits())), s.seed) == key
        });
        let set = match existing {
            Some(set) => set,
            None => {
                let range = match row.range {
                    Some([lo, hi]) => Some(PercentileRange::new(lo, hi)?),
                    None => None,
                };
                sets.push(HardNegativeSet::new(row.direction, row.strategy, range, row.seed));
                sets.last_mut().expect("just pushed")
            }
        };
        set.insert_anchor(&row.anchor_id, row.negatives)?;
    }
    Ok(sets)
}

fn positives_of(labels: &LabelSet, direction: MineDirection, anchor_id: &str) -> BTreeSet<String> {
    match direction {
        MineDirection::JobsForResumes => labels.positive_jobs(anchor_id, None),
        MineDirection::ResumesForJobs => labels.positive_resumes(anchor_id, None),
    }
}

/// Rank `(id, score)` pairs descending by score, ties ascending by id.
fn rank_descending(mut scored: Vec<(String, f64)>) -> Vec<(String, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

// ======================================================
// Runner-up mining
// ======================================================

/// Runner-up mining over a precomputed score matrix (rows are anchors,
/// columns are candidates). For each anchor: drop its labeled positives and
/// itself, rank the rest descending, keep the `(lo, hi]` percentile band of
/// ranks, and sample `n_per_anchor` uniformly without replacement from the
/// band. Errors if the band is empty or smaller than `n_per_anchor`.
pub fn runner_up_mine_scored(
    matrix: &ScoreMatrix,
    labels: &LabelSet,
    direction: MineDirection,
    range: PercentileRange,
    n_per_anchor: usize,
    seed: u64,
) -> Result<HardNegativeSet> {
    if n_per_anchor == 0 {
        return Err(Error::InvalidParam {
            name: "n_per_anchor".into(),
            detail: "must be positive".into(),
        });
    }
    let mut set =
        HardNegativeSet::new(direction, MineStrategy::RunnerUp, Some(range), Some(seed));
    for anchor_id in matrix.row_ids() {
        let positives = positives_of(labels, direction, anchor_id);
        let row = matrix.row(anchor_id)?;
        let scored: Vec<(String, f64)> = matrix
            .col_ids()
            .iter()
            .zip(row)
            .filter(|(id, _)| *id != anchor_id && !positives.contains(*id))
            .map(|(id, s)| (id.clone(), *s))
            .collect();
        let eligible = scored.len();
        let (lo_rank, hi_rank) = range.rank_interval(eligible);
        if lo_rank >= hi_rank {
            return Err(Error::EmptyRankInterval { lo: range.lo, hi: range.hi, eligible });
        }
        let band_len = hi_rank - lo_rank;
        if band_len < n_per_anchor {
            return Err(Error::IntervalTooSmall {
                anchor_id: anchor_id.clone(),
                wanted: n_per_anchor,
                available: band_len,
            });
        }
        let ranked = rank_descending(scored);
        let band = &ranked[lo_rank..hi_rank];
        let mut rng = rng_stream_for(seed, "runner-up-mine", anchor_id);
        let mut picked: Vec<usize> =
            rand::seq::index::sample(&mut rng, band_len, n_per_anchor).into_vec();
        picked.sort_unstable();
        let negatives: Vec<MinedNegative> = picked
            .into_iter()
            .map(|i| MinedNegative {
                id: band[i].0.clone(),
                score: Some(band[i].1),
                rank: Some(lo_rank + i + 1),
            })
            .collect();
        set.insert_anchor(anchor_id, negatives)?;
    }
    Ok(set)
}

/// Runner-up mining from embeddings: scores anchors against candidates with
/// the given adapter, then delegates to [`runner_up_mine_scored`].
#[allow(clippy::too_many_arguments)]
pub fn runner_up_mine(
    anchor_ids: &[String],
    candidate_ids: &[String],
    store: &EmbeddingStore,
    adapter: &AdapterParams,
    labels: &LabelSet,
    direction: MineDirection,
    range: PercentileRange,
    n_per_anchor: usize,
    seed: u64,
) -> Result<HardNegativeSet> {
    let matrix = score_matrix(anchor_ids, candidate_ids, store, adapter)?;
    runner_up_mine_scored(&matrix, labels, direction, range, n_per_anchor, seed)
}

/// Experimental variant that ranks all (anchor, candidate) pairs in one
/// global list and takes the percentile band over that list, instead of
/// per-anchor bands. Anchors may end up with fewer than `n_per_anchor`
/// negatives (recorded in `warnings`) or none at all. No fidelity to the
/// per-anchor scheme is claimed; this exists for comparison runs.
pub fn runner_up_mine_global(
    matrix: &ScoreMatrix,
    labels: &LabelSet,
    direction: MineDirection,
    range: PercentileRange,
    n_per_anchor: usize,
    seed: u64,
) -> Result<HardNegativeSet> {
    if n_per_anchor == 0 {
        return Err(Error::InvalidParam {
            name: "n_per_anchor".into(),
            detail: "must be positive".into(),
        });
    }
    let mut pairs: Vec<(String, String, f64)> = Vec::new();
    for anchor_id in matrix.row_ids() {
        let positives = positives_of(labels, direction, anchor_id);
        let row = matrix.row(anchor_id)?;
        for (col_id, s) in matrix.col_ids().iter().zip(row) {
            if col_id != anchor_id && !positives.contains(col_id) {
                pairs.push((anchor_id.clone(), col_id.clone(), *s));
            }
        }
    }
    let eligible = pairs.len();
    let (lo_rank, hi_rank) = range.rank_interval(eligible);
    if lo_rank >= hi_rank {
        return Err(Error::EmptyRankInterval { lo: range.lo, hi: range.hi, eligible });
    }
    pairs.sort_by(|a, b| {
        b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)).then_with(|| a.1.cmp(&b.1))
    });
    let band = &pairs[lo_rank..hi_rank];

    let mut by_anchor: BTreeMap<&str, Vec<(usize, &(String, String, f64))>> = BTreeMap::new();
    for (i, pair) in band.iter().enumerate() {
        by_anchor.entry(pair.0.as_str()).or_default().push((lo_rank + i + 1, pair));
    }
    let mut set =
        HardNegativeSet::new(direction, MineStrategy::RunnerUp, Some(range), Some(seed));
    for (anchor_id, entries) in by_anchor {
        let take = n_per_anchor.min(entries.len());
        let mut rng = rng_stream_for(seed, "runner-up-mine-global", anchor_id);
        let mut picked: Vec<usize> =
            rand::seq::index::sample(&mut rng, entries.len(), take).into_vec();
        picked.sort_unstable();
        let negatives: Vec<MinedNegative> = picked
            .into_iter()
            .map(|i| {
                let (global_rank, (_, id, score)) = &entries[i];
                MinedNegative { id: id.clone(), score: Some(*score), rank: Some(*global_rank) }
            })
            .collect();
        if negatives.len() < n_per_anchor {
            set.warnings.push(anchor_id.to_string());
        }
        set.insert_anchor(anchor_id, negatives)?;
    }
    Ok(set)
}

// ======================================================
// Baseline strategies
// ======================================================

/// Lexical baseline: for each anchor text, the top `k` eligible candidates
/// by BM25. Anchors with fewer than `k` eligible candidates get all of them
/// and are recorded in `warnings`.
pub fn bm25_topk_mine(
    anchors: &[(String, String)],
    candidates: &[(String, String)],
    k: usize,
    labels: &LabelSet,
    direction: MineDirection,
    params: Bm25Params,
) -> Result<HardNegativeSet> {
    if k == 0 {
        return Err(Error::InvalidParam { name: "k".into(), detail: "must be positive".into() });
    }
    let texts: Vec<String> = candidates.iter().map(|(_, t)| t.clone()).collect();
    let index = Bm25Index::build(&texts, params)?;
    let mut set = HardNegativeSet::new(direction, MineStrategy::Bm25TopK, None, None);
    for (anchor_id, anchor_text) in anchors {
        let positives = positives_of(labels, direction, anchor_id);
        let scores = index.scores(anchor_text);
        let scored: Vec<(String, f64)> = candidates
            .iter()
            .zip(&scores)
            .filter(|((id, _), _)| id != anchor_id && !positives.contains(id))
            .map(|((id, _), s)| (id.clone(), *s))
            .collect();
        let ranked = rank_descending(scored);
        if ranked.len() < k {
            set.warnings.push(anchor_id.clone());
        }
        let negatives: Vec<MinedNegative> = ranked
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (id, score))| MinedNegative {
                id,
                score: Some(score),
                rank: Some(i + 1),
            })
            .collect();
        set.insert_anchor(anchor_id, negatives)?;
    }
    Ok(set)
}

/// Labeled rejections: each anchor's negatives are its label-0 partners.
/// Anchors with none get an empty list and a warning.
pub fn rejected_mine(
    anchor_ids: &[String],
    labels: &LabelSet,
    direction: MineDirection,
) -> Result<HardNegativeSet> {
    let mut set = HardNegativeSet::new(direction, MineStrategy::Rejected, None, None);
    for anchor_id in anchor_ids {
        let rejected = match direction {
            MineDirection::JobsForResumes => labels.rejected_jobs(anchor_id),
            MineDirection::ResumesForJobs => labels.rejected_resumes(anchor_id),
        };
        if rejected.is_empty() {
            set.warnings.push(anchor_id.clone());
        }
        let negatives: Vec<MinedNegative> = rejected
            .into_iter()
            .map(|id| MinedNegative { id, score: None, rank: None })
            .collect();
        set.insert_anchor(anchor_id, negatives)?;
    }
    Ok(set)
}

/// Uniform baseline: `n_per_anchor` eligible candidates sampled uniformly
/// without replacement per anchor, from a (seed, anchor) stream. Anchors
/// with fewer eligible candidates than requested get all of them and a
/// warning.
pub fn random_mine(
    anchor_ids: &[String],
    candidate_ids: &[String],
    labels: &LabelSet,
    direction: MineDirection,
    n_per_anchor: usize,
    seed: u64,
) -> Result<HardNegativeSet> {
    if n_per_anchor == 0 {
        return Err(Error::InvalidParam {
            name: "n_per_anchor".into(),
            detail: "must be positive".into(),
        });
    }
    let mut set = HardNegativeSet::new(direction, MineStrategy::Random, None, Some(seed));
    for anchor_id in anchor_ids {
        let positives = positives_of(labels, direction, anchor_id);
        let eligible: Vec<&String> = candidate_ids
            .iter()
            .filter(|id| *id != anchor_id && !positives.contains(*id))
            .collect();
        let take = n_per_anchor.min(eligible.len());
        if take < n_per_anchor {
            set.warnings.push(anchor_id.clone());
        }
        let mut rng = rng_stream_for(seed, "random-mine", anchor_id);
        let mut picked: Vec<usize> =
            rand::seq::index::sample(&mut rng, eligible.len(), take).into_vec();
        picked.sort_unstable();
        let negatives: Vec<MinedNegative> = picked
            .into_iter()
            .map(|i| MinedNegative { id: eligible[i].clone(), score: None, rank: None })
            .collect();
        set.insert_anchor(anchor_id, negatives)?;
    }
    Ok(set)
}

// ======================================================
// Ground-truth audit
// ======================================================

/// Fraction of mined negatives that are actually compatible with their
/// anchor under the full ground truth, i.e. false negatives. Errors if the
/// set is empty or any mined pair is missing from the ground truth.
pub fn false_negative_rate(set: &HardNegativeSet, gt: &GroundTruth) -> Result<f64> {
    let mut total = 0usize;
    let mut false_negatives = 0usize;
    for anchor_id in set.anchors() {
        for neg in set.get(anchor_id).unwrap_or_default() {
            let compatible = match set.direction {
                MineDirection::JobsForResumes => gt.is_compatible(anchor_id, &neg.id)?,
                MineDirection::ResumesForJobs => gt.is_compatible(&neg.id, anchor_id)?,
            };
            total += 1;
            if compatible {
                false_negatives += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Invalid { detail: "no mined negatives to audit".into() });
    }
    Ok(false_negatives as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelEntry, Split};

    fn labels(pairs: &[(&str, &str, u8)]) -> LabelSet {
        LabelSet::new(
            pairs
                .iter()
                .map(|(r, j, l)| LabelEntry {
                    resume_id: r.to_string(),
                    job_id: j.to_string(),
                    label: *l,
                    split: Split::Train,
                })
                .collect(),
        )
        .unwrap()
    }

    /// Matrix with one anchor row `a0` and candidates `c000..c{n-1}` whose
    /// scores strictly decrease with the index, so candidate `c{i}` holds
    /// rank `i+1`.
    fn descending_matrix(n: usize) -> ScoreMatrix {
        let col_ids: Vec<String> = (0..n).map(|i| format!("c{i:03}")).collect();
        let scores: Vec<f64> = (0..n).map(|i| -(i as f64)).collect();
        ScoreMatrix::new(vec!["a0".to_string()], col_ids, scores).unwrap()
    }

    #[test]
    fn range_three_four_over_hundred_is_exactly_rank_four() {
        let matrix = descending_matrix(100);
        let set = runner_up_mine_scored(
            &matrix,
            &labels(&[]),
            MineDirection::JobsForResumes,
            PercentileRange::new(3.0, 4.0).unwrap(),
            1,
            7,
        )
        .unwrap();
        let negs = set.get("a0").unwrap();
        assert_eq!(negs.len(), 1);
        assert_eq!(negs[0].id, "c003"); // rank 4
        assert_eq!(negs[0].rank, Some(4));
    }

    #[test]
    fn positives_and_self_are_excluded() {
        let col_ids: Vec<String> =
            (0..10).map(|i| format!("c{i:03}")).chain(["a0".to_string()]).collect();
        let mut scores: Vec<f64> = (0..10).map(|i| -(i as f64)).collect();
        scores.push(100.0); // the anchor itself scores highest
        let matrix = ScoreMatrix::new(vec!["a0".to_string()], col_ids, scores).unwrap();
        let lbls = labels(&[("a0", "c000", 1)]);
        let set = runner_up_mine_scored(
            &matrix,
            &lbls,
            MineDirection::JobsForResumes,
            PercentileRange::new(0.0, 100.0).unwrap(),
            9,
            7,
        )
        .unwrap();
        let mined: BTreeSet<String> =
            set.get("a0").unwrap().iter().map(|n| n.id.clone()).collect();
        assert!(!mined.contains("a0"));
        assert!(!mined.contains("c000"));
        assert_eq!(mined.len(), 9);
    }

    #[test]
    fn empty_band_is_an_error() {
        let matrix = descending_matrix(10);
        let err = runner_up_mine_scored(
            &matrix,
            &labels(&[]),
            MineDirection::JobsForResumes,
            PercentileRange::new(3.0, 4.0).unwrap(), // floor(0.3)=0, floor(0.4)=0
            1,
            7,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyRankInterval { .. }));
    }

    #[test]
    fn band_smaller_than_request_is_an_error() {
        let matrix = descending_matrix(100);
        let err = runner_up_mine_scored(
            &matrix,
            &labels(&[]),
            MineDirection::JobsForResumes,
            PercentileRange::new(3.0, 4.0).unwrap(), // band = {rank 4}, one candidate
            2,
            7,
        )
        .unwrap_err();
        assert!(matches!(err, Error::IntervalTooSmall { .. }));
    }

    #[test]
    fn mining_is_deterministic_and_seed_sensitive() {
        let matrix = descending_matrix(200);
        let range = PercentileRange::new(10.0, 50.0).unwrap();
        let mine = |seed| {
            runner_up_mine_scored(&matrix, &labels(&[]), MineDirection::JobsForResumes, range, 5, seed)
                .unwrap()
        };
        assert_eq!(mine(7), mine(7));
        assert_ne!(mine(7), mine(8));
    }

    #[test]
    fn sampled_ranks_stay_inside_the_band() {
        let matrix = descending_matrix(997);
        let range = PercentileRange::new(3.0, 4.0).unwrap();
        let (lo, hi) = range.rank_interval(997);
        let set = runner_up_mine_scored(
            &matrix,
            &labels(&[]),
            MineDirection::JobsForResumes,
            range,
            3,
            42,
        )
        .unwrap();
        for n in set.get("a0").unwrap() {
            let rank = n.rank.unwrap();
            assert!(rank > lo && rank <= hi, "rank {rank} outside ({lo}, {hi}]");
        }
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        assert!(PercentileRange::new(4.0, 3.0).is_err());
        assert!(PercentileRange::new(3.0, 3.0).is_err());
        assert!(PercentileRange::new(-1.0, 4.0).is_err());
        assert!(PercentileRange::new(3.0, 101.0).is_err());
    }

    #[test]
    fn rejected_mine_returns_label_zero_partners() {
        let lbls = labels(&[("r1", "j1", 0), ("r1", "j2", 1), ("r1", "j3", 0)]);
        let set =
            rejected_mine(&["r1".to_string()], &lbls, MineDirection::JobsForResumes).unwrap();
        let ids: Vec<&str> = set.get("r1").unwrap().iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, vec!["j1", "j3"]);
    }

    #[test]
    fn bm25_mine_ranks_lexically_and_warns_when_short() {
        let anchors = vec![("r1".to_string(), "rust systems".to_string())];
        let candidates = vec![
            ("j1".to_string(), "rust systems engineer".to_string()),
            ("j2".to_string(), "bakery assistant".to_string()),
        ];
        let lbls = labels(&[]);
        let set = bm25_topk_mine(
            &anchors,
            &candidates,
            5,
            &lbls,
            MineDirection::JobsForResumes,
            Bm25Params::default(),
        )
        .unwrap();
        let negs = set.get("r1").unwrap();
        assert_eq!(negs.len(), 2);
        assert_eq!(negs[0].id, "j1");
        assert_eq!(set.warnings, vec!["r1"]);
    }

    #[test]
    fn random_mine_is_deterministic_and_excludes_positives() {
        let candidates: Vec<String> = (0..20).map(|i| format!("j{i:02}")).collect();
        let lbls = labels(&[("r1", "j00", 1)]);
        let mine = |seed| {
            random_mine(
                &["r1".to_string()],
                &candidates,
                &lbls,
                MineDirection::JobsForResumes,
                4,
                seed,
            )
            .unwrap()
        };
        let a = mine(3);
        assert_eq!(a, mine(3));
        assert!(a.get("r1").unwrap().iter().all(|n| n.id != "j00"));
        assert_eq!(a.get("r1").unwrap().len(), 4);
    }

    #[test]
    fn negatives_roundtrip_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("negatives.jsonl");
        let matrix = descending_matrix(100);
        let set = runner_up_mine_scored(
            &matrix,
            &labels(&[]),
            MineDirection::JobsForResumes,
            PercentileRange::default(),
            1,
            7,
        )
        .unwrap();
        set.save(&path).unwrap();
        assert_eq!(HardNegativeSet::load(&path).unwrap(), set);
    }

    #[test]
    fn false_negative_rate_checks_ground_truth() {
        use crate::corpus::synthetic::{generate_synthetic, SyntheticSpec};
        let corpus = generate_synthetic(&SyntheticSpec {
            n_resumes: 5,
            n_jobs: 10,
            latent_dim: 3,
            label_density: 1.0,
            accept_threshold: -2.0, // everything compatible
            noise_sigma: 0.0,
            seed: 1,
        })
        .unwrap();
        let mut set =
            HardNegativeSet::new(MineDirection::JobsForResumes, MineStrategy::Random, None, None);
        set.insert_anchor(
            "r0000",
            vec![MinedNegative { id: "j0000".into(), score: None, rank: None }],
        )
        .unwrap();
        assert_eq!(false_negative_rate(&set, &corpus.ground_truth).unwrap(), 1.0);

        let mut missing =
            HardNegativeSet::new(MineDirection::JobsForResumes, MineStrategy::Random, None, None);
        missing
            .insert_anchor(
                "r0000",
                vec![MinedNegative { id: "ghost".into(), score: None, rank: None }],
            )
            .unwrap();
        assert!(matches!(
            false_negative_rate(&missing, &corpus.ground_truth),
            Err(Error::MissingGroundTruth { .. })
        ));
    }

    #[test]
    fn global_variant_covers_the_global_band() {
        let row_ids: Vec<String> = (0..4).map(|i| format!("a{i}")).collect();
        let col_ids: Vec<String> = (0..25).map(|i| format!("c{i:02}")).collect();
        let scores: Vec<f64> = (0..100).map(|i| -(i as f64)).collect();
        let matrix = ScoreMatrix::new(row_ids, col_ids, scores).unwrap();
        let set = runner_up_mine_global(
            &matrix,
            &labels(&[]),
            MineDirection::JobsForResumes,
            PercentileRange::new(0.0, 10.0).unwrap(),
            100,
            7,
        )
        .unwrap();
        assert_eq!(set.total_negatives(), 10);
    }
}
