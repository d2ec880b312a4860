//! End-to-end run: augment, embed, train with mining rounds, evaluate,
//! and write every artifact plus a content-hash manifest into one output
//! directory. Reruns reuse the augmentation ledger and the embedding
//! cache, so a repeated run with the same config does no new provider or
//! LLM work.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fitrank_core::adapter::AdapterParams;
use fitrank_core::augment::{
    augment_all, choose_example_pairs, load_ledger, save_ledger, AugmentGenerator, LlmClient,
};
use fitrank_core::corpus::{
    attribute_map, load_attributes, load_corpus, DocKind, Document, LabelSet, Split,
};
use fitrank_core::embedder::{embed_documents, EmbedCache, EmbeddingStore};
use fitrank_core::evalreport::{
    bias_report, evaluate, render_table, EvalDirection, EvalTask, MetricsReport,
};
use fitrank_core::hashing::sha256_hex;
use fitrank_core::miner::save_combined;
use fitrank_core::scorer::RankingResult;
use fitrank_core::trainer::{
    train_iterative, AdapterCheckpoint, CheckpointProvenance, IterativeConfig,
};
use fitrank_core::Error;
use serde::Serialize;

use crate::config::{LlmConfig, RunConfig};

/// A pipeline failure, tagged with the stage that died.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "pipeline failed at stage {}: {}", self.stage, self.message)
    }
}

fn stage<T, E: std::fmt::Display>(name: &'static str, r: Result<T, E>) -> Result<T, StageError> {
    r.map_err(|e| StageError { stage: name, message: e.to_string() })
}

#[derive(Serialize)]
struct TrainLogRow {
    iteration: usize,
    epoch: usize,
    n_batches: usize,
    mean_loss: f64,
    valid_ndcg: Option<f64>,
}

#[derive(Serialize)]
struct FinalReport {
    rank_jobs: MetricsReport,
    rank_resumes: MetricsReport,
}

pub struct PipelineOutcome {
    pub out_dir: PathBuf,
    pub artifacts: Vec<String>,
}

fn build_llm(config: &LlmConfig) -> fitrank_core::Result<Box<dyn LlmClient>> {
    use fitrank_core::augment::{HttpLlmClient, MockLlm};
    Ok(match config {
        LlmConfig::Echo => Box::new(MockLlm::echo_target_job()),
        LlmConfig::Fixed { text } => Box::new(MockLlm::fixed(text.clone())),
        LlmConfig::Http { base_url } => Box::new(HttpLlmClient::new(base_url.clone())?),
    })
}

/// Generate (or reload) augmented job texts. The ledger doubles as the
/// artifact: reruns warm the generation cache from it, so each distinct
/// prompt costs at most one LLM call across runs.
pub fn augment_stage(
    config: &RunConfig,
    docs: &[Document],
    labels: &LabelSet,
    ledger_path: &Path,
) -> fitrank_core::Result<BTreeMap<String, String>> {
    let jobs: Vec<&Document> = docs.iter().filter(|d| d.kind == DocKind::Job).collect();
    if jobs.is_empty() {
        return Err(Error::InvalidParam {
            name: "docs".into(),
            detail: "no job documents to augment".into(),
        });
    }
    let client = build_llm(&config.augment.llm)?;
    let mut generator =
        AugmentGenerator::new(client.as_ref(), &config.augment.model, config.augment.temperature);
    if ledger_path.exists() {
        generator.warm_from_ledger(&load_ledger(ledger_path)?);
    }
    let by_id: BTreeMap<&str, &Document> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let examples_ids = choose_example_pairs(labels, config.augment.n_shots, config.seed)?;
    let mut examples = Vec::with_capacity(examples_ids.len());
    for (job_id, resume_id) in &examples_ids {
        let job = by_id
            .get(job_id.as_str())
            .ok_or_else(|| Error::UnknownDoc { id: job_id.clone() })?;
        let resume = by_id
            .get(resume_id.as_str())
            .ok_or_else(|| Error::UnknownDoc { id: resume_id.clone() })?;
        examples.push((*job, *resume));
    }
    let records = augment_all(&jobs, &examples, config.augment.n_shots, &mut generator)?;
    save_ledger(ledger_path, &records)?;
    Ok(records.into_iter().map(|r| (r.job_id, r.combined_text)).collect())
}

/// Embed all documents through the configured provider, with augmented
/// job texts substituted when present, reading and refreshing the
/// on-disk cache.
pub fn embed_stage(
    config: &RunConfig,
    docs: &[Document],
    augmented: Option<&BTreeMap<String, String>>,
    cache_path: &Path,
    out_path: &Path,
) -> fitrank_core::Result<EmbeddingStore> {
    let provider = config.provider.build(config.seed)?;
    let mut cache =
        if cache_path.exists() { EmbedCache::load(cache_path)? } else { EmbedCache::new() };
    let store = embed_documents(docs, provider.as_ref(), augmented, Some(&mut cache))?;
    cache.save(cache_path)?;
    store.save(out_path)?;
    Ok(store)
}

fn split_ids(docs: &[Document], kind: DocKind) -> Vec<String> {
    docs.iter().filter(|d| d.kind == kind).map(|d| d.id.clone()).collect()
}

pub fn eval_task_for(
    labels: &LabelSet,
    split: Split,
    direction: EvalDirection,
    docs: &[Document],
    k: usize,
) -> fitrank_core::Result<EvalTask> {
    let pool = match direction {
        EvalDirection::RankJobs => split_ids(docs, DocKind::Job),
        EvalDirection::RankResumes => split_ids(docs, DocKind::Resume),
    };
    EvalTask::from_labels(labels, split, direction, pool, k).map_err(|e| match e {
        Error::InvalidParam { name, .. } if name == "queries" => Error::InvalidParam {
            name: format!("labels[{split}]"),
            detail: format!(
                "the {split} split has no accepted pairs to evaluate; \
                 enlarge the corpus or rebalance the splits"
            ),
        },
        other => other,
    })
}

/// Run everything and fill `out_dir`. Artifact names are fixed; the
/// manifest lists each one's SHA-256 so two runs can be compared
/// byte-for-byte without diffing the files themselves.
pub fn run_pipeline(
    config: &RunConfig,
    docs_path: &Path,
    labels_path: &Path,
    attributes_path: Option<&Path>,
    out_dir: &Path,
) -> Result<PipelineOutcome, StageError> {
    stage("prepare-output", std::fs::create_dir_all(out_dir))?;

    let (docs, labels) = stage("load-inputs", load_corpus(docs_path, labels_path))?;
    stage("load-inputs", labels.validate_against(&docs))?;
    let attributes = match attributes_path {
        Some(path) => Some(stage("load-inputs", load_attributes(path))?),
        None => None,
    };

    let augmented = if config.augment.enabled {
        let ledger = out_dir.join("augmentations.jsonl");
        Some(stage("augment", augment_stage(config, &docs, &labels, &ledger))?)
    } else {
        None
    };

    let store = stage(
        "embed",
        embed_stage(
            config,
            &docs,
            augmented.as_ref(),
            &out_dir.join("embed_cache.jsonl"),
            &out_dir.join("embeddings.jsonl"),
        ),
    )?;

    let valid_task = stage(
        "train",
        eval_task_for(&labels, Split::Valid, EvalDirection::RankJobs, &docs, config.eval.k),
    )?;
    let iterative = IterativeConfig {
        train: config.train.clone(),
        iterations: config.iterations,
        range: stage("train", config.mining.percentile_range())?,
        n_per_anchor: config.mining.n_per_anchor,
        continue_from_previous: config.continue_from_previous,
    };
    let resume_pool = split_ids(&docs, DocKind::Resume);
    let job_pool = split_ids(&docs, DocKind::Job);
    let outcomes = stage(
        "train",
        train_iterative(
            &iterative,
            &store,
            &labels,
            &resume_pool,
            &job_pool,
            &valid_task,
            config.temperature,
        ),
    )?;

    let first = outcomes.first().expect("at least one round");
    let bootstrap = AdapterCheckpoint::from_adapter(
        &first.adapter,
        Some(config.train.clone()),
        CheckpointProvenance { strategy: None, range: None, iteration: Some(1) },
    );
    stage("train", bootstrap.save(&out_dir.join("adapter_bootstrap.json")))?;

    let last = outcomes.last().expect("at least one round");
    if let (Some(jobs), Some(resumes)) = (&last.job_negatives, &last.resume_negatives) {
        stage("train", save_combined(&out_dir.join("negatives.jsonl"), &[jobs, resumes]))?;
    }
    let provenance = if config.iterations > 1 {
        CheckpointProvenance {
            strategy: Some(config.mining.strategy),
            range: Some(config.mining.range),
            iteration: Some(last.iteration),
        }
    } else {
        CheckpointProvenance { strategy: None, range: None, iteration: Some(last.iteration) }
    };
    let final_checkpoint =
        AdapterCheckpoint::from_adapter(&last.adapter, Some(config.train.clone()), provenance);
    stage("train", final_checkpoint.save(&out_dir.join("adapter.json")))?;

    let log_rows: Vec<TrainLogRow> = outcomes
        .iter()
        .flat_map(|o| {
            o.log.iter().map(|e| TrainLogRow {
                iteration: o.iteration,
                epoch: e.epoch,
                n_batches: e.n_batches,
                mean_loss: e.mean_loss,
                valid_ndcg: e.valid_ndcg,
            })
        })
        .collect();
    stage(
        "train",
        fitrank_core::jsonl::write_jsonl(&out_dir.join("train_log.jsonl"), &log_rows),
    )?;

    let eval_split = stage("evaluate", config.eval_split().map_err(StringError))?;
    let adapter = &last.adapter;
    let (jobs_report, _jobs_rankings) =
        run_eval(&labels, eval_split, EvalDirection::RankJobs, &docs, config.eval.k, &store, adapter)?;
    let (resumes_report, resumes_rankings) = run_eval(
        &labels,
        eval_split,
        EvalDirection::RankResumes,
        &docs,
        config.eval.k,
        &store,
        adapter,
    )?;
    let report = FinalReport { rank_jobs: jobs_report, rank_resumes: resumes_report };
    let report_text = stage("evaluate", serde_json::to_string_pretty(&report))?;
    stage(
        "evaluate",
        std::fs::write(out_dir.join("report.json"), report_text + "\n"),
    )?;
    print!("{}", render_table(&[&report.rank_jobs, &report.rank_resumes]));

    if let (Some(records), Some(attribute)) = (&attributes, &config.eval.bias_attribute) {
        let attrs = attribute_map(records, attribute);
        let bias = stage(
            "bias",
            bias_report(
                attribute,
                &resumes_rankings,
                &resume_pool,
                &attrs,
                config.eval.bias_top_n,
            ),
        )?;
        let text = stage("bias", serde_json::to_string_pretty(&bias))?;
        stage("bias", std::fs::write(out_dir.join("bias.json"), text + "\n"))?;
    }

    let outcome = stage("manifest", write_manifest(config, out_dir))?;
    Ok(outcome)
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    labels: &LabelSet,
    split: Split,
    direction: EvalDirection,
    docs: &[Document],
    k: usize,
    store: &EmbeddingStore,
    adapter: &AdapterParams,
) -> Result<(MetricsReport, Vec<RankingResult>), StageError> {
    let task = stage("evaluate", eval_task_for(labels, split, direction, docs, k))?;
    stage("evaluate", evaluate(&task, store, adapter))
}

/// Wrapper so plain String errors fit the stage adapter.
struct StringError(String);

impl std::fmt::Display for StringError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn write_manifest(config: &RunConfig, out_dir: &Path) -> Result<PipelineOutcome, String> {
    #[derive(Serialize)]
    struct Manifest {
        config_sha256: String,
        artifacts: BTreeMap<String, String>,
    }
    let config_text =
        serde_json::to_string_pretty(config).map_err(|e| format!("serializing config: {e}"))?;
    let mut artifacts = BTreeMap::new();
    let names = [
        "augmentations.jsonl",
        "embed_cache.jsonl",
        "embeddings.jsonl",
        "adapter_bootstrap.json",
        "negatives.jsonl",
        "adapter.json",
        "train_log.jsonl",
        "report.json",
        "bias.json",
    ];
    for name in names {
        let path = out_dir.join(name);
        if path.exists() {
            let bytes = std::fs::read(&path).map_err(|e| format!("reading {name}: {e}"))?;
            artifacts.insert(name.to_string(), sha256_hex(&bytes));
        }
    }
    let manifest =
        Manifest { config_sha256: sha256_hex(config_text.as_bytes()), artifacts };
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| format!("serializing manifest: {e}"))?;
    std::fs::write(out_dir.join("manifest.json"), text + "\n")
        .map_err(|e| format!("writing manifest: {e}"))?;
    let mut names: Vec<String> = manifest.artifacts.keys().cloned().collect();
    names.push("manifest.json".into());
    Ok(PipelineOutcome { out_dir: out_dir.to_path_buf(), artifacts: names })
}
