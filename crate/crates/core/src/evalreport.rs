//! Ranking evaluation and reporting.
//!
//! Metrics are binary-relevance recall@k and nDCG@k with the log2(rank+1)
//! discount, macro-averaged over queries. Every query must have at least
//! one relevant candidate in the pool; building a task from labels simply
//! drops queries with none.
//!
//! The bias summary compares how often each attribute group appears near
//! the top of rankings against that group's share of the candidate pool.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapter::AdapterParams;
use crate::corpus::{LabelSet, Split};
use crate::embedder::EmbeddingStore;
use crate::error::{Error, Result};
use crate::scorer::{top_k, RankingResult};

// ======================================================
// Metrics
// ======================================================

/// Fraction of the relevant set found in the top `k` of `ranked_ids`.
pub fn recall_at_k(ranked_ids: &[String], relevant: &BTreeSet<String>, k: usize) -> Result<f64> {
    check_metric_inputs(relevant, k)?;
    let hits = ranked_ids.iter().take(k).filter(|id| relevant.contains(*id)).count();
    Ok(hits as f64 / relevant.len() as f64)
}

/// Binary nDCG@k: DCG sums 1/log2(rank+1) over relevant items in the top
/// `k` (ranks are 1-based); the ideal DCG places relevant items first.
pub fn ndcg_at_k(ranked_ids: &[String], relevant: &BTreeSet<String>, k: usize) -> Result<f64> {
    check_metric_inputs(relevant, k)?;
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    let dcg: f64 = ranked_ids
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| relevant.contains(*id))
        .map(|(i, _)| discount(i + 1))
        .sum();
    let ideal_hits = relevant.len().min(k);
    let idcg: f64 = (1..=ideal_hits).map(discount).sum();
    Ok(dcg / idcg)
}

fn check_metric_inputs(relevant: &BTreeSet<String>, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParam { name: "k".into(), detail: "must be positive".into() });
    }
    if relevant.is_empty() {
        return Err(Error::EmptyRelevant);
    }
    Ok(())
}

// ======================================================
// Evaluation tasks
// ======================================================

/// Which way the ranking runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalDirection {
    /// Queries are resumes; candidates are jobs.
    RankJobs,
    /// Queries are jobs; candidates are resumes.
    RankResumes,
}

impl std::fmt::Display for EvalDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalDirection::RankJobs => write!(f, "rank_jobs"),
            EvalDirection::RankResumes => write!(f, "rank_resumes"),
        }
    }
}

/// A fixed retrieval benchmark: queries, a shared candidate pool, and each
/// query's relevant candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTask {
    pub direction: EvalDirection,
    pub queries: Vec<String>,
    pub candidate_pool: Vec<String>,
    pub relevant: BTreeMap<String, BTreeSet<String>>,
    pub k: usize,
}

impl EvalTask {
    /// Validate shape: positive `k`, non-empty queries and pool, no
    /// duplicate ids, and every query's relevant set non-empty and fully
    /// inside the pool.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParam { name: "k".into(), detail: "must be positive".into() });
        }
        if self.queries.is_empty() {
            return Err(Error::InvalidParam {
                name: "queries".into(),
                detail: "no queries to evaluate".into(),
            });
        }
        if self.candidate_pool.is_empty() {
            return Err(Error::InvalidParam {
                name: "candidate_pool".into(),
                detail: "empty candidate pool".into(),
            });
        }
        let pool: BTreeSet<&String> = self.candidate_pool.iter().collect();
        if pool.len() != self.candidate_pool.len() {
            return Err(Error::InvalidParam {
                name: "candidate_pool".into(),
                detail: "duplicate candidate ids".into(),
            });
        }
        let mut seen_queries = BTreeSet::new();
        for q in &self.queries {
            if !seen_queries.insert(q) {
                return Err(Error::InvalidParam {
                    name: "queries".into(),
                    detail: format!("duplicate query id {q:?}"),
                });
            }
            let relevant = self.relevant.get(q).ok_or(Error::EmptyRelevant)?;
            if relevant.is_empty() {
                return Err(Error::EmptyRelevant);
            }
            for id in relevant {
                if !pool.contains(id) {
                    return Err(Error::RelevantNotInPool {
                        query_id: q.clone(),
                        candidate_id: id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Build a task from labels: queries are documents on the query side
    /// with at least one accepted partner in `split`; the pool is given by
    /// the caller.
    pub fn from_labels(
        labels: &LabelSet,
        split: Split,
        direction: EvalDirection,
        candidate_pool: Vec<String>,
        k: usize,
    ) -> Result<EvalTask> {
        let pool: BTreeSet<&String> = candidate_pool.iter().collect();
        let mut relevant: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for entry in labels.split_entries(split) {
            if !entry.is_positive() {
                continue;
            }
            let (query, candidate) = match direction {
                EvalDirection::RankJobs => (&entry.resume_id, &entry.job_id),
                EvalDirection::RankResumes => (&entry.job_id, &entry.resume_id),
            };
            if pool.contains(candidate) {
                relevant.entry(query.clone()).or_default().insert(candidate.clone());
            }
        }
        let queries: Vec<String> = relevant.keys().cloned().collect();
        let task = EvalTask { direction, queries, candidate_pool, relevant, k };
        task.validate()?;
        Ok(task)
    }
}

/// One query's metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub recall: f64,
    pub ndcg: f64,
}

/// Macro-averaged metrics for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub direction: EvalDirection,
    pub k: usize,
    pub n_queries: usize,
    pub recall_at_k: f64,
    pub ndcg_at_k: f64,
    pub per_query: BTreeMap<String, QueryMetrics>,
}

impl MetricsReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invalid { detail: format!("serializing report: {e}") })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<MetricsReport> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Invalid { detail: format!("parsing {}: {e}", path.display()) })
    }
}

/// Rank every query against the pool and report macro-averaged metrics.
/// Also returns the full per-query rankings for downstream use.
pub fn evaluate(
    task: &EvalTask,
    store: &EmbeddingStore,
    adapter: &AdapterParams,
) -> Result<(MetricsReport, Vec<RankingResult>)> {
    task.validate()?;
    let mut per_query = BTreeMap::new();
    let mut rankings = Vec::with_capacity(task.queries.len());
    let mut recall_sum = 0.0;
    let mut ndcg_sum = 0.0;
    for query_id in &task.queries {
        let ranking = top_k(query_id, &task.candidate_pool, store, task.candidate_pool.len(), adapter)?;
        let ranked_ids: Vec<String> = ranking.ranked.iter().map(|(id, _)| id.clone()).collect();
        let relevant = &task.relevant[query_id];
        let recall = recall_at_k(&ranked_ids, relevant, task.k)?;
        let ndcg = ndcg_at_k(&ranked_ids, relevant, task.k)?;
        recall_sum += recall;
        ndcg_sum += ndcg;
        per_query.insert(query_id.clone(), QueryMetrics { recall, ndcg });
        rankings.push(ranking);
    }
    let n = task.queries.len() as f64;
    Ok((
        MetricsReport {
            direction: task.direction,
            k: task.k,
            n_queries: task.queries.len(),
            recall_at_k: recall_sum / n,
            ndcg_at_k: ndcg_sum / n,
            per_query,
        },
        rankings,
    ))
}

/// Render one or more reports as an aligned text table.
pub fn render_table(reports: &[&MetricsReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:>4} {:>9} {:>10} {:>10}", "direction", "k", "queries", "recall@k", "ndcg@k");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14} {:>4} {:>9} {:>10.4} {:>10.4}",
            r.direction.to_string(),
            r.k,
            r.n_queries,
            r.recall_at_k,
            r.ndcg_at_k
        );
    }
    out
}

// ======================================================
// Bias summary
// ======================================================

/// Exposure of attribute groups near the top of rankings, compared with
/// their share of the candidate pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub attribute: String,
    pub top_n: usize,
    /// Queries whose top-n contained at least one candidate with a known
    /// attribute value.
    pub n_queries_used: usize,
    /// Queries skipped because no candidate in their top-n had a known
    /// attribute value.
    pub n_queries_skipped: usize,
    /// Macro-averaged share of each group among attributed candidates in
    /// the top-n.
    pub exposure_shares: BTreeMap<String, f64>,
    /// Share of each group among attributed candidates in the whole pool.
    pub pool_shares: BTreeMap<String, f64>,
    /// Largest |exposure - pool share| over groups.
    pub max_gap: f64,
}

/// Compare group exposure in the top `top_n` of each ranking against the
/// pool distribution. `attribute_of` maps candidate id to group; candidates
/// without an entry are ignored on both sides.
pub fn bias_report(
    attribute: &str,
    rankings: &[RankingResult],
    pool: &[String],
    attribute_of: &BTreeMap<String, String>,
    top_n: usize,
) -> Result<BiasReport> {
    if top_n == 0 {
        return Err(Error::InvalidParam {
            name: "top_n".into(),
            detail: "must be positive".into(),
        });
    }
    if rankings.is_empty() {
        return Err(Error::InvalidParam {
            name: "rankings".into(),
            detail: "no rankings to audit".into(),
        });
    }

    let groups: BTreeSet<&String> = attribute_of.values().collect();
    if groups.is_empty() {
        return Err(Error::InvalidParam {
            name: "attribute_of".into(),
            detail: format!("no documents carry attribute {attribute:?}"),
        });
    }

    let mut exposure_sums: BTreeMap<String, f64> =
        groups.iter().map(|g| ((*g).clone(), 0.0)).collect();
    let mut used = 0usize;
    let mut skipped = 0usize;
    for ranking in rankings {
        let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
        let mut attributed = 0usize;
        for (id, _) in ranking.ranked.iter().take(top_n) {
            if let Some(group) = attribute_of.get(id) {
                *counts.entry(group).or_insert(0) += 1;
                attributed += 1;
            }
        }
        if attributed == 0 {
            skipped += 1;
            continue;
        }
        used += 1;
        for (group, count) in counts {
            *exposure_sums.get_mut(group).expect("group seen in pool") +=
                count as f64 / attributed as f64;
        }
    }
    if used == 0 {
        return Err(Error::Invalid {
            detail: format!("no ranking had attributed candidates in its top {top_n}"),
        });
    }
    let exposure_shares: BTreeMap<String, f64> =
        exposure_sums.into_iter().map(|(g, s)| (g, s / used as f64)).collect();

    let mut pool_counts: BTreeMap<&String, usize> = BTreeMap::new();
    let mut pool_attributed = 0usize;
    for id in pool {
        if let Some(group) = attribute_of.get(id) {
            *pool_counts.entry(group).or_insert(0) += 1;
            pool_attributed += 1;
        }
    }
    if pool_attributed == 0 {
        return Err(Error::Invalid {
            detail: format!("no candidate in the pool carries attribute {attribute:?}"),
        });
    }
    let pool_shares: BTreeMap<String, f64> = groups
        .iter()
        .map(|g| {
            let count = pool_counts.get(*g).copied().unwrap_or(0);
            ((*g).clone(), count as f64 / pool_attributed as f64)
        })
        .collect();

    let max_gap = exposure_shares
        .iter()
        .map(|(g, e)| (e - pool_shares[g]).abs())
        .fold(0.0f64, f64::max);

    Ok(BiasReport {
        attribute: attribute.to_string(),
        top_n,
        n_queries_used: used,
        n_queries_skipped: skipped,
        exposure_shares,
        pool_shares,
        max_gap,
    })
}
