//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants carry
//! enough context (ids, paths, line numbers) that a caller can report the
//! failure without re-deriving it.

use std::fmt;

/// Errors produced by corpus handling, embedding, scoring, mining, training,
/// augmentation, and evaluation.
#[derive(Debug)]
pub enum Error {
    /// An I/O failure, annotated with the path being read or written.
    Io { path: String, source: std::io::Error },
    /// A line of a JSONL file failed to parse.
    MalformedLine { path: String, line: usize, detail: String },
    /// The same document id appeared more than once in a corpus.
    DuplicateDocId { id: String },
    /// A label referenced a document id that is not in the corpus.
    DanglingLabel { resume_id: String, job_id: String, missing: String },
    /// A label value was neither 0 nor 1.
    InvalidLabel { resume_id: String, job_id: String, label: i64 },
    /// The same (resume, job) pair was labeled more than once.
    DuplicateLabel { resume_id: String, job_id: String },
    /// A document id was looked up but not found.
    UnknownDoc { id: String },
    /// A vector had zero norm and could not be normalized.
    ZeroVector { context: String },
    /// A vector contained NaN or infinite entries.
    NonFinite { context: String },
    /// A vector's dimension did not match the store or adapter dimension.
    DimensionMismatch { context: String, expected: usize, got: usize },
    /// A required embedding was missing from the store.
    MissingEmbedding { doc_id: String },
    /// An embedding record for a doc id was inserted twice.
    DuplicateEmbedding { doc_id: String },
    /// An embedding record's provider tag did not match the store's.
    ProviderMismatch { expected: String, got: String, doc_id: String },
    /// An embedding provider failed after retries; lists the affected ids.
    ProviderFailure { provider: String, detail: String, failed_ids: Vec<String> },
    /// An LLM call failed or returned an unusable completion.
    LlmFailure { detail: String },
    /// A generated completion was empty.
    EmptyGeneration { prompt_hash: String },
    /// Prompt construction was asked for more shots than examples available,
    /// or zero shots.
    BadShotCount { n_shots: usize, available: usize },
    /// A percentile range was invalid (lo >= hi, or outside [0, 100]).
    InvalidRange { lo: f64, hi: f64 },
    /// A percentile range mapped to an empty rank interval.
    EmptyRankInterval { lo: f64, hi: f64, eligible: usize },
    /// A rank interval held fewer candidates than the requested sample size.
    IntervalTooSmall { anchor_id: String, wanted: usize, available: usize },
    /// A mined id had no ground-truth entry.
    MissingGroundTruth { id: String },
    /// A training pair had no negatives in either direction.
    NoNegatives { resume_id: String, job_id: String },
    /// The loss became NaN or infinite during training.
    NonFiniteLoss { epoch: usize, step: usize },
    /// A batch was empty or otherwise unusable.
    EmptyBatch,
    /// An evaluation query had an empty relevant set.
    EmptyRelevant,
    /// An evaluation task listed a relevant id outside the candidate pool.
    RelevantNotInPool { query_id: String, candidate_id: String },
    /// A cutoff or count parameter was zero where it must be positive.
    InvalidParam { name: String, detail: String },
    /// A catch-all for invalid inputs not covered by a dedicated variant.
    Invalid { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Error::*;
        match self {
            Io { path, source } => write!(f, "io error on {path}: {source}"),
            MalformedLine { path, line, detail } => {
                write!(f, "{path}:{line}: malformed line: {detail}")
            }
            DuplicateDocId { id } => write!(f, "duplicate document id {id:?}"),
            DanglingLabel { resume_id, job_id, missing } => write!(
                f,
                "label ({resume_id:?}, {job_id:?}) references unknown document {missing:?}"
            ),
            InvalidLabel { resume_id, job_id, label } => write!(
                f,
                "label ({resume_id:?}, {job_id:?}) has non-binary value {label}"
            ),
            DuplicateLabel { resume_id, job_id } => {
                write!(f, "pair ({resume_id:?}, {job_id:?}) labeled more than once")
            }
            UnknownDoc { id } => write!(f, "unknown document id {id:?}"),
            ZeroVector { context } => write!(f, "zero-norm vector: {context}"),
            NonFinite { context } => write!(f, "non-finite vector entries: {context}"),
            DimensionMismatch { context, expected, got } => {
                write!(f, "dimension mismatch ({context}): expected {expected}, got {got}")
            }
            MissingEmbedding { doc_id } => write!(f, "no embedding for document {doc_id:?}"),
            DuplicateEmbedding { doc_id } => {
                write!(f, "embedding for document {doc_id:?} inserted twice")
            }
            ProviderMismatch { expected, got, doc_id } => write!(
                f,
                "embedding for {doc_id:?} has provider {got:?}, store expects {expected:?}"
            ),
            ProviderFailure { provider, detail, failed_ids } => write!(
                f,
                "provider {provider:?} failed for {} document(s) [{}]: {detail}",
                failed_ids.len(),
                failed_ids.join(", ")
            ),
            LlmFailure { detail } => write!(f, "llm call failed: {detail}"),
            EmptyGeneration { prompt_hash } => {
                write!(f, "llm returned an empty completion for prompt {prompt_hash}")
            }
            BadShotCount { n_shots, available } => write!(
                f,
                "cannot build a {n_shots}-shot prompt from {available} example pair(s)"
            ),
            InvalidRange { lo, hi } => write!(f, "invalid percentile range ({lo}, {hi}]"),
            EmptyRankInterval { lo, hi, eligible } => write!(
                f,
                "percentile range ({lo}, {hi}] maps to an empty rank interval over {eligible} eligible candidate(s)"
            ),
            IntervalTooSmall { anchor_id, wanted, available } => write!(
                f,
                "anchor {anchor_id:?}: rank interval holds {available} candidate(s), {wanted} requested"
            ),
            MissingGroundTruth { id } => write!(f, "no ground-truth entry for {id:?}"),
            NoNegatives { resume_id, job_id } => write!(
                f,
                "pair ({resume_id:?}, {job_id:?}) has no negatives in either direction"
            ),
            NonFiniteLoss { epoch, step } => {
                write!(f, "non-finite loss at epoch {epoch}, step {step}")
            }
            EmptyBatch => write!(f, "empty training batch"),
            EmptyRelevant => write!(f, "a query has an empty relevant set"),
            RelevantNotInPool { query_id, candidate_id } => write!(
                f,
                "query {query_id:?} lists relevant {candidate_id:?} outside the candidate pool"
            ),
            InvalidParam { name, detail } => write!(f, "invalid parameter {name}: {detail}"),
            Invalid { detail } => write!(f, "{detail}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    /// Wrap an I/O error with the path it occurred on.
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
