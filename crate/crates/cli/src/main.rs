//! Command-line front end: each pipeline stage as a subcommand, plus
//! `pipeline` to run them all into one artifact directory.
//!
//! Exit codes: 0 on success, 2 when the configuration or input corpus
//! fails validation, 1 for any other failure.

mod config;
mod pipeline;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fitrank_core::adapter::AdapterParams;
use fitrank_core::corpus::synthetic::{generate_synthetic, SyntheticSpec};
use fitrank_core::corpus::{
    attribute_map, load_attributes, load_corpus, save_corpus, DocKind, Document, LabelSet, Split,
};
use fitrank_core::embedder::EmbeddingStore;
use fitrank_core::evalreport::{bias_report, evaluate, render_table, EvalDirection};
use fitrank_core::miner::{
    bm25_topk_mine, random_mine, rejected_mine, runner_up_mine, runner_up_mine_global, save_combined,
    load_combined, HardNegativeSet, MineDirection, MineStrategy,
};
use fitrank_core::scorer::bm25::Bm25Params;
use fitrank_core::scorer::score_matrix;
use fitrank_core::trainer::{
    train_adapter, AdapterCheckpoint, CheckpointProvenance,
};

use crate::config::RunConfig;
use crate::pipeline::{augment_stage, embed_stage, eval_task_for, run_pipeline};

#[derive(Parser)]
#[command(name = "fitrank", version, about = "Dense retrieval for resume-job matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (JSON). Omitted fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| CliError::Validation(vec![e]))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let problems = config.validate();
        if !problems.is_empty() {
            return Err(CliError::Validation(problems));
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and print summary statistics.
    Ingest {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        attributes: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with known ground truth.
    Synth {
        /// Generation spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Generate augmented job texts through the configured LLM.
    Augment {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Output ledger (JSONL); also warm-started from if present.
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed documents into a vector store file.
    Embed {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        docs: PathBuf,
        /// Augmentation ledger; when given, job texts are replaced by
        /// their augmented versions.
        #[arg(long)]
        augmentations: Option<PathBuf>,
        /// Embedding cache file, read and refreshed.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine hard negatives from an embedding store.
    Mine {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Adapter checkpoint to score with; identity if omitted.
        #[arg(long)]
        adapter: Option<PathBuf>,
        /// Which side to mine: jobs, resumes, or both.
        #[arg(long, default_value = "both")]
        direction: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the adapter on accepted pairs.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Mined negatives (single- or mixed-direction file).
        #[arg(long)]
        negatives: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Epoch log (JSONL).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate an adapter on a label split.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        adapter: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Audit group exposure near the top of rankings.
    Bias {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        adapter: PathBuf,
        #[arg(long)]
        attributes: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage into an artifact directory.
    Pipeline {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        attributes: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
}

enum CliError {
    /// Bad configuration or corpus: exit 2.
    Validation(Vec<String>),
    /// Everything else: exit 1.
    Runtime(String),
}

impl From<fitrank_core::Error> for CliError {
    fn from(e: fitrank_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(vec![e.to_string()])
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(problems)) => {
            for p in &problems {
                eprintln!("error: {p}");
            }
            eprintln!(
                "{} validation problem{} found",
                problems.len(),
                if problems.len() == 1 { "" } else { "s" }
            );
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn load_validated_corpus(
    docs: &Path,
    labels: &Path,
) -> Result<(Vec<Document>, LabelSet), CliError> {
    let (docs, labels) = load_corpus(docs, labels).map_err(validation)?;
    labels.validate_against(&docs).map_err(validation)?;
    Ok((docs, labels))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { docs, labels, attributes } => {
            let (docs, labels) = load_validated_corpus(&docs, &labels)?;
            let n_resumes = docs.iter().filter(|d| d.kind == DocKind::Resume).count();
            let n_jobs = docs.iter().filter(|d| d.kind == DocKind::Job).count();
            println!("documents: {} resumes, {} jobs", n_resumes, n_jobs);
            for split in [Split::Train, Split::Valid, Split::Test] {
                let entries: Vec<_> = labels.split_entries(split).collect();
                let positives = entries.iter().filter(|e| e.is_positive()).count();
                println!(
                    "labels[{split}]: {} total, {} accepted, {} rejected",
                    entries.len(),
                    positives,
                    entries.len() - positives
                );
            }
            if let Some(path) = attributes {
                let records = load_attributes(&path).map_err(validation)?;
                let mut by_attribute: BTreeMap<&str, usize> = BTreeMap::new();
                for r in &records {
                    *by_attribute.entry(r.attribute.as_str()).or_insert(0) += 1;
                }
                for (attribute, count) in by_attribute {
                    println!("attributes[{attribute}]: {count} documents");
                }
            }
            println!("corpus ok");
            Ok(())
        }

        Command::Synth { spec, out_dir } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| validation(format!("cannot read spec {}: {e}", spec.display())))?;
            let spec: SyntheticSpec = serde_json::from_str(&text)
                .map_err(|e| validation(format!("cannot parse spec: {e}")))?;
            let corpus = generate_synthetic(&spec).map_err(validation)?;
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| CliError::Runtime(format!("creating {}: {e}", out_dir.display())))?;
            save_corpus(
                &out_dir.join("docs.jsonl"),
                &out_dir.join("labels.jsonl"),
                &corpus.documents,
                &corpus.labels,
            )?;
            let gt = serde_json::to_string(&corpus.ground_truth)
                .map_err(|e| CliError::Runtime(format!("serializing ground truth: {e}")))?;
            std::fs::write(out_dir.join("ground_truth.json"), gt + "\n")
                .map_err(|e| CliError::Runtime(format!("writing ground truth: {e}")))?;
            println!(
                "wrote {} documents, {} labels to {}",
                corpus.documents.len(),
                corpus.labels.len(),
                out_dir.display()
            );
            Ok(())
        }

        Command::Augment { config, docs, labels, out } => {
            let config = config.load()?;
            let (docs, labels) = load_validated_corpus(&docs, &labels)?;
            let augmented = augment_stage(&config, &docs, &labels, &out)?;
            println!("augmented {} jobs into {}", augmented.len(), out.display());
            Ok(())
        }

        Command::Embed { config, docs, augmentations, cache, out } => {
            let config = config.load()?;
            let docs = fitrank_core::jsonl::read_jsonl::<Document>(&docs).map_err(validation)?;
            let augmented = match augmentations {
                Some(path) => {
                    let records = fitrank_core::augment::load_ledger(&path)?;
                    Some(
                        records
                            .into_iter()
                            .map(|r| (r.job_id, r.combined_text))
                            .collect::<BTreeMap<_, _>>(),
                    )
                }
                None => None,
            };
            let cache_path = cache.unwrap_or_else(|| out.with_extension("cache.jsonl"));
            let store = embed_stage(&config, &docs, augmented.as_ref(), &cache_path, &out)?;
            println!(
                "embedded {} documents (dim {}) into {}",
                store.len(),
                store.dim(),
                out.display()
            );
            Ok(())
        }

        Command::Mine { config, embeddings, docs, labels, adapter, direction, out } => {
            let config = config.load()?;
            let store = EmbeddingStore::load(&embeddings)?;
            let (docs, labels) = load_validated_corpus(&docs, &labels)?;
            let adapter = load_adapter_or_identity(adapter.as_deref(), &store, &config)?;
            let directions: Vec<MineDirection> = match direction.as_str() {
                "jobs" => vec![MineDirection::JobsForResumes],
                "resumes" => vec![MineDirection::ResumesForJobs],
                "both" => {
                    vec![MineDirection::JobsForResumes, MineDirection::ResumesForJobs]
                }
                other => {
                    return Err(validation(format!(
                        "--direction must be jobs, resumes, or both, got {other:?}"
                    )))
                }
            };
            let train_pairs = labels.positive_pairs(Split::Train);
            if train_pairs.is_empty() {
                return Err(validation("no accepted training pairs to mine for"));
            }
            let unique = |ids: Vec<String>| -> Vec<String> {
                let set: std::collections::BTreeSet<String> = ids.into_iter().collect();
                set.into_iter().collect()
            };
            let anchor_resumes = unique(train_pairs.iter().map(|p| p.0.clone()).collect());
            let anchor_jobs = unique(train_pairs.iter().map(|p| p.1.clone()).collect());
            let kind_ids = |kind: DocKind| -> Vec<String> {
                docs.iter().filter(|d| d.kind == kind).map(|d| d.id.clone()).collect()
            };
            let job_pool = kind_ids(DocKind::Job);
            let resume_pool = kind_ids(DocKind::Resume);
            let mut sets: Vec<HardNegativeSet> = Vec::new();
            for dir in directions {
                let (anchors, pool) = match dir {
                    MineDirection::JobsForResumes => (&anchor_resumes, &job_pool),
                    MineDirection::ResumesForJobs => (&anchor_jobs, &resume_pool),
                };
                let set =
                    mine_one(&config, &store, &docs, &labels, &adapter, dir, anchors, pool)?;
                sets.push(set);
            }
            let refs: Vec<&HardNegativeSet> = sets.iter().collect();
            save_combined(&out, &refs)?;
            let total: usize = sets.iter().map(|s| s.total_negatives()).sum();
            println!("mined {} negatives into {}", total, out.display());
            Ok(())
        }

        Command::Train { config, embeddings, labels, negatives, out, log } => {
            let config = config.load()?;
            let store = EmbeddingStore::load(&embeddings)?;
            let labels = fitrank_core::jsonl::read_jsonl(&labels)
                .and_then(LabelSet::new)
                .map_err(validation)?;
            let pairs = labels.positive_pairs(Split::Train);
            let (job_negatives, resume_negatives) = match negatives {
                Some(path) => {
                    let sets = load_combined(&path)?;
                    let jobs = sets
                        .iter()
                        .find(|s| s.direction == MineDirection::JobsForResumes)
                        .cloned();
                    let resumes = sets
                        .iter()
                        .find(|s| s.direction == MineDirection::ResumesForJobs)
                        .cloned();
                    (jobs, resumes)
                }
                None => (None, None),
            };
            let init =
                AdapterParams::identity(store.dim(), config.temperature, config.seed)?;
            let result = train_adapter(
                &config.train,
                &init,
                &pairs,
                &store,
                job_negatives.as_ref(),
                resume_negatives.as_ref(),
                None,
            )?;
            let provenance = CheckpointProvenance {
                strategy: job_negatives
                    .as_ref()
                    .or(resume_negatives.as_ref())
                    .map(|s| s.strategy),
                range: job_negatives
                    .as_ref()
                    .or(resume_negatives.as_ref())
                    .and_then(|s| s.range.map(|r| [r.lo, r.hi])),
                iteration: None,
            };
            let checkpoint = AdapterCheckpoint::from_adapter(
                &result.adapter,
                Some(config.train.clone()),
                provenance,
            );
            checkpoint.save(&out)?;
            if let Some(log_path) = log {
                fitrank_core::jsonl::write_jsonl(&log_path, &result.log)?;
            }
            let last_loss = result.log.last().map(|e| e.mean_loss);
            println!(
                "trained {} epochs (final mean loss {}) into {}",
                result.epochs_run,
                last_loss.map_or("n/a".to_string(), |l| format!("{l:.6}")),
                out.display()
            );
            Ok(())
        }

        Command::Eval { config, embeddings, docs, labels, adapter, out } => {
            let config = config.load()?;
            let store = EmbeddingStore::load(&embeddings)?;
            let (docs, labels) = load_validated_corpus(&docs, &labels)?;
            let adapter = AdapterCheckpoint::load(&adapter)?.to_adapter()?;
            let split = config.eval_split().map_err(validation)?;
            let mut reports = Vec::new();
            for direction in [EvalDirection::RankJobs, EvalDirection::RankResumes] {
                let task = eval_task_for(&labels, split, direction, &docs, config.eval.k)?;
                let (report, _) = evaluate(&task, &store, &adapter)?;
                reports.push(report);
            }
            let json = serde_json::json!({
                "rank_jobs": reports[0],
                "rank_resumes": reports[1],
            });
            let text = serde_json::to_string_pretty(&json)
                .map_err(|e| CliError::Runtime(format!("serializing report: {e}")))?;
            std::fs::write(&out, text + "\n")
                .map_err(|e| CliError::Runtime(format!("writing {}: {e}", out.display())))?;
            print!("{}", render_table(&[&reports[0], &reports[1]]));
            Ok(())
        }

        Command::Bias { config, embeddings, docs, labels, adapter, attributes, out } => {
            let config = config.load()?;
            let attribute = config.eval.bias_attribute.clone().ok_or_else(|| {
                validation("config must set eval.bias_attribute for the bias command")
            })?;
            let store = EmbeddingStore::load(&embeddings)?;
            let (docs, labels) = load_validated_corpus(&docs, &labels)?;
            let adapter = AdapterCheckpoint::load(&adapter)?.to_adapter()?;
            let records = load_attributes(&attributes).map_err(validation)?;
            let attrs = attribute_map(&records, &attribute);
            let split = config.eval_split().map_err(validation)?;
            let task =
                eval_task_for(&labels, split, EvalDirection::RankResumes, &docs, config.eval.k)?;
            let (_, rankings) = evaluate(&task, &store, &adapter)?;
            let resume_pool: Vec<String> = docs
                .iter()
                .filter(|d| d.kind == DocKind::Resume)
                .map(|d| d.id.clone())
                .collect();
            let report =
                bias_report(&attribute, &rankings, &resume_pool, &attrs, config.eval.bias_top_n)?;
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Runtime(format!("serializing bias report: {e}")))?;
            std::fs::write(&out, text + "\n")
                .map_err(|e| CliError::Runtime(format!("writing {}: {e}", out.display())))?;
            println!(
                "bias[{}]: max exposure gap {:.4} over {} queries",
                report.attribute, report.max_gap, report.n_queries_used
            );
            Ok(())
        }

        Command::Pipeline { config, docs, labels, attributes, out_dir } => {
            let config = config.load()?;
            let outcome =
                run_pipeline(&config, &docs, &labels, attributes.as_deref(), &out_dir)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!(
                "pipeline complete: {} artifacts in {}",
                outcome.artifacts.len(),
                outcome.out_dir.display()
            );
            Ok(())
        }
    }
}

fn load_adapter_or_identity(
    path: Option<&Path>,
    store: &EmbeddingStore,
    config: &RunConfig,
) -> Result<AdapterParams, CliError> {
    match path {
        Some(p) => Ok(AdapterCheckpoint::load(p)?.to_adapter()?),
        None => Ok(AdapterParams::identity(store.dim(), config.temperature, config.seed)?),
    }
}

#[allow(clippy::too_many_arguments)]
fn mine_one(
    config: &RunConfig,
    store: &EmbeddingStore,
    docs: &[Document],
    labels: &LabelSet,
    adapter: &AdapterParams,
    direction: MineDirection,
    anchors: &[String],
    pool: &[String],
) -> Result<HardNegativeSet, CliError> {
    let range = config.mining.percentile_range()?;
    Ok(match config.mining.strategy {
        MineStrategy::RunnerUp => {
            if config.mining.global {
                let matrix = score_matrix(anchors, pool, store, adapter)?;
                runner_up_mine_global(
                    &matrix,
                    labels,
                    direction,
                    range,
                    config.mining.n_per_anchor,
                    config.seed,
                )?
            } else {
                runner_up_mine(
                    anchors,
                    pool,
                    store,
                    adapter,
                    labels,
                    direction,
                    range,
                    config.mining.n_per_anchor,
                    config.seed,
                )?
            }
        }
        MineStrategy::Rejected => rejected_mine(anchors, labels, direction)?,
        MineStrategy::Random => random_mine(
            anchors,
            pool,
            labels,
            direction,
            config.mining.n_per_anchor,
            config.seed,
        )?,
        MineStrategy::Bm25TopK => {
            let texts: BTreeMap<&str, String> = docs
                .iter()
                .map(|d| (d.id.as_str(), fitrank_core::corpus::flatten_document(d)))
                .collect();
            let with_texts = |ids: &[String]| -> Result<Vec<(String, String)>, CliError> {
                ids.iter()
                    .map(|id| {
                        texts
                            .get(id.as_str())
                            .map(|t| (id.clone(), t.clone()))
                            .ok_or_else(|| validation(format!("no document text for {id:?}")))
                    })
                    .collect()
            };
            bm25_topk_mine(
                &with_texts(anchors)?,
                &with_texts(pool)?,
                config.mining.bm25_k,
                labels,
                direction,
                Bm25Params::default(),
            )?
        }
    })
}
