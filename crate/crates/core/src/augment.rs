//! Job-post augmentation with generated hypothetical resumes.
//!
//! For each job post, a few-shot prompt built from accepted (job, resume)
//! pairs asks an LLM to write an ideal resume for that job. The generation
//! is appended to the job text behind a fixed marker, and the combined text
//! is what gets embedded for that job. Generations are cached by prompt
//! hash and persisted to an append-only ledger, so a model is called at
//! most once per distinct (model, prompt) and re-runs are free and
//! deterministic.
//!
//! Augmentation applies to job posts only, at both train and test time;
//! resumes are always embedded as-is.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{flatten_document, Document, LabelSet, Split};
use crate::embedder::EmbeddingStore;
use crate::error::{Error, Result};
use crate::hashing::content_hash;
use crate::jsonl;
use crate::seeding::rng_stream;

/// Environment variable holding the LLM service bearer token.
pub const LLM_KEY_ENV: &str = "FITRANK_LLM_KEY";

// ======================================================
// Prompt template
// ======================================================

pub const PROMPT_HEADER: &str = "Here is a template pair of matching resume and job:";
pub const EXAMPLE_JOB_START: &str = "[The start of the example job]";
pub const EXAMPLE_JOB_END: &str = "[The end of the example job]";
pub const EXAMPLE_RESUME_START: &str = "[The start of the example resume]";
pub const EXAMPLE_RESUME_END: &str = "[The end of the example resume]";
pub const TARGET_JOB_START: &str = "[The start of the target job]";
pub const TARGET_JOB_END: &str = "[The end of the target job]";
pub const PROMPT_INSTRUCTION: &str = "You are a helpful assistant. Following the above example pair of job and resume, construct an ideal resume for the target job shown below. You should strictly follow the format of the given pairs, make sure the resume you give perfectly matches the target job, and directly return your answer in plain text.";

/// Marker inserted between a job text and its generated resume in the
/// combined text.
pub const RESUME_MARKER: &str = "[\"An Example Resume\"]";

/// A rendered few-shot prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPrompt {
    /// (job text, resume text) of each example pair, in prompt order.
    pub example_pairs: Vec<(String, String)>,
    pub target_job_text: String,
    pub rendered: String,
}

impl AugmentPrompt {
    /// Hash of the rendered prompt, used as the cache and ledger key.
    pub fn prompt_hash(&self) -> String {
        content_hash(&self.rendered)
    }
}

fn block_text(doc: &Document) -> String {
    flatten_document(doc).trim_end_matches('\n').to_string()
}

/// Build the few-shot prompt: a header, `n_shots` example (job, resume)
/// pairs wrapped in bracket markers, the fixed instruction, and the target
/// job. `examples` are (job, resume) pairs; the first `n_shots` are used in
/// order.
pub fn build_prompt(
    examples: &[(&Document, &Document)],
    target: &Document,
    n_shots: usize,
) -> Result<AugmentPrompt> {
    if n_shots == 0 || n_shots > examples.len() {
        return Err(Error::BadShotCount { n_shots, available: examples.len() });
    }
    let mut example_pairs = Vec::with_capacity(n_shots);
    let mut blocks: Vec<String> = vec![PROMPT_HEADER.to_string()];
    for (job, resume) in examples.iter().take(n_shots) {
        let job_text = block_text(job);
        let resume_text = block_text(resume);
        blocks.push(EXAMPLE_JOB_START.to_string());
        blocks.push(job_text.clone());
        blocks.push(EXAMPLE_JOB_END.to_string());
        blocks.push(EXAMPLE_RESUME_START.to_string());
        blocks.push(resume_text.clone());
        blocks.push(EXAMPLE_RESUME_END.to_string());
        example_pairs.push((job_text, resume_text));
    }
    blocks.push(PROMPT_INSTRUCTION.to_string());
    let target_job_text = block_text(target);
    blocks.push(TARGET_JOB_START.to_string());
    blocks.push(target_job_text.clone());
    blocks.push(TARGET_JOB_END.to_string());

    let mut rendered = blocks.join("\n\n");
    rendered.push('\n');
    Ok(AugmentPrompt { example_pairs, target_job_text, rendered })
}

/// Pick the example (job_id, resume_id) pairs for a run: a seeded sample
/// without replacement from the accepted train pairs. Fixed once per run so
/// every target job sees the same examples.
pub fn choose_example_pairs(
    labels: &LabelSet,
    n: usize,
    seed: u64,
) -> Result<Vec<(String, String)>> {
    let accepted: Vec<(String, String)> = labels
        .positive_pairs(Split::Train)
        .into_iter()
        .map(|(resume_id, job_id)| (job_id, resume_id))
        .collect();
    if n == 0 || n > accepted.len() {
        return Err(Error::BadShotCount { n_shots: n, available: accepted.len() });
    }
    let mut rng = rng_stream(seed, "augment-example-pairs");
    let picked = rand::seq::index::sample(&mut rng, accepted.len(), n);
    Ok(picked.iter().map(|i| accepted[i].clone()).collect())
}

// ======================================================
// LLM clients
// ======================================================

/// A chat-completion backend.
pub trait LlmClient {
    fn generate(&self, model: &str, temperature: f64, prompt: &str) -> Result<String>;
}

/// Offline mock: either a fixed completion, or an echo of the target job
/// section of the prompt. Counts calls so tests can assert cache behavior.
pub struct MockLlm {
    mode: MockMode,
    calls: AtomicUsize,
}

enum MockMode {
    Fixed(String),
    EchoTargetJob,
}

impl MockLlm {
    /// Always returns `completion`.
    pub fn fixed(completion: impl Into<String>) -> Self {
        MockLlm { mode: MockMode::Fixed(completion.into()), calls: AtomicUsize::new(0) }
    }

    /// Returns the text between the target-job markers of the prompt: the
    /// "ideal resume" is the job's own description.
    pub fn echo_target_job() -> Self {
        MockLlm { mode: MockMode::EchoTargetJob, calls: AtomicUsize::new(0) }
    }

    /// Number of generate calls made so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for MockLlm {
    fn generate(&self, _model: &str, _temperature: f64, prompt: &str) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.mode {
            MockMode::Fixed(s) => Ok(s.clone()),
            MockMode::EchoTargetJob => {
                let start = prompt.find(TARGET_JOB_START).map(|i| i + TARGET_JOB_START.len());
                let end = prompt.find(TARGET_JOB_END);
                match (start, end) {
                    (Some(s), Some(e)) if s <= e => Ok(prompt[s..e].trim().to_string()),
                    _ => Err(Error::LlmFailure {
                        detail: "prompt has no target job section to echo".into(),
                    }),
                }
            }
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Calls a chat-completion service: `POST {base_url}/chat/completions` with
/// a single user message. Failed calls retry with exponential backoff.
pub struct HttpLlmClient {
    base_url: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

impl HttpLlmClient {
    /// Build a client for `base_url`, reading the bearer token from the
    /// `FITRANK_LLM_KEY` environment variable if set.
    pub fn new(base_url: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Invalid { detail: format!("http client: {e}") })?;
        Ok(HttpLlmClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: std::env::var(LLM_KEY_ENV).ok(),
            max_retries: 3,
            backoff: Duration::from_millis(200),
            client,
        })
    }

    pub fn with_retry(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    fn call_once(&self, model: &str, temperature: f64, prompt: &str) -> std::result::Result<String, String> {
        let body = ChatRequest {
            model,
            temperature,
            messages: vec![ChatMessage { role: "user", content: prompt }],
        };
        let mut req =
            self.client.post(format!("{}/chat/completions", self.base_url)).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("status {status}"));
        }
        let body: ChatResponse = resp.json().map_err(|e| e.to_string())?;
        body.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| "response has no choices".to_string())
    }
}

impl LlmClient for HttpLlmClient {
    fn generate(&self, model: &str, temperature: f64, prompt: &str) -> Result<String> {
        let mut last_err = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.call_once(model, temperature, prompt) {
                Ok(out) => return Ok(out),
                Err(e) => last_err = e,
            }
        }
        Err(Error::LlmFailure {
            detail: format!("after {} attempt(s): {last_err}", self.max_retries + 1),
        })
    }
}

// ======================================================
// Cached generation and the ledger
// ======================================================

/// One persisted generation, keyed by prompt hash. `augmentations.jsonl`
/// holds one of these per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub job_id: String,
    pub prompt_hash: String,
    pub model: String,
    pub temperature: f64,
    pub generated_resume: String,
    pub combined_text: String,
}

/// Load a generation ledger.
pub fn load_ledger(path: &Path) -> Result<Vec<GenerationRecord>> {
    jsonl::read_jsonl(path)
}

/// Write a generation ledger.
pub fn save_ledger(path: &Path, records: &[GenerationRecord]) -> Result<()> {
    jsonl::write_jsonl(path, records)
}

/// Generates hypothetical resumes through a client, calling the model at
/// most once per distinct (model, prompt). Greedy decoding (temperature 0)
/// by default.
pub struct AugmentGenerator<'c> {
    client: &'c dyn LlmClient,
    model: String,
    temperature: f64,
    cache: BTreeMap<(String, String), String>,
}

impl<'c> AugmentGenerator<'c> {
    pub fn new(client: &'c dyn LlmClient, model: impl Into<String>, temperature: f64) -> Self {
        AugmentGenerator { client, model: model.into(), temperature, cache: BTreeMap::new() }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Preload the cache from ledger records (matching model only), so
    /// re-runs make no client calls for already-generated prompts.
    pub fn warm_from_ledger(&mut self, records: &[GenerationRecord]) {
        for r in records {
            if r.model == self.model {
                self.cache
                    .insert((r.model.clone(), r.prompt_hash.clone()), r.generated_resume.clone());
            }
        }
    }

    /// The hypothetical resume for a prompt; cached by prompt hash. An
    /// empty or whitespace-only completion is an error.
    pub fn generate(&mut self, prompt: &AugmentPrompt) -> Result<String> {
        let hash = prompt.prompt_hash();
        let key = (self.model.clone(), hash.clone());
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let out = self.client.generate(&self.model, self.temperature, &prompt.rendered)?;
        if out.trim().is_empty() {
            return Err(Error::EmptyGeneration { prompt_hash: hash });
        }
        self.cache.insert(key, out.clone());
        Ok(out)
    }
}

// ======================================================
// Combining job and generated resume
// ======================================================

/// A job post paired with its generated resume and the combined text that
/// replaces the job text downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedJob {
    pub job_id: String,
    pub original_text: String,
    pub generated_resume: String,
    pub combined_text: String,
}

/// `original + "\n" + marker + "\n" + generated`, the exact concatenation
/// used for embedding augmented jobs.
pub fn combine_texts(original: &str, generated_resume: &str) -> String {
    format!("{original}\n{RESUME_MARKER}\n{generated_resume}")
}

/// Attach a generated resume to a job. The job's text is its flattened
/// form; an empty generation is rejected.
pub fn augment_job(job: &Document, generated_resume: &str) -> Result<AugmentedJob> {
    if generated_resume.trim().is_empty() {
        return Err(Error::InvalidParam {
            name: "generated_resume".into(),
            detail: "must be non-empty".into(),
        });
    }
    let original_text = flatten_document(job);
    let combined_text = combine_texts(&original_text, generated_resume);
    Ok(AugmentedJob {
        job_id: job.id.clone(),
        original_text,
        generated_resume: generated_resume.to_string(),
        combined_text,
    })
}

/// Run the full augment stage over `jobs` with fixed example pairs:
/// build each prompt, generate (via cache), and combine. Returns one
/// ledger record per job, in input order.
pub fn augment_all(
    jobs: &[&Document],
    examples: &[(&Document, &Document)],
    n_shots: usize,
    generator: &mut AugmentGenerator<'_>,
) -> Result<Vec<GenerationRecord>> {
    let mut out = Vec::with_capacity(jobs.len());
    for job in jobs {
        let prompt = build_prompt(examples, job, n_shots)?;
        let generated = generator.generate(&prompt)?;
        let augmented = augment_job(job, &generated)?;
        out.push(GenerationRecord {
            job_id: job.id.clone(),
            prompt_hash: prompt.prompt_hash(),
            model: generator.model().to_string(),
            temperature: generator.temperature(),
            generated_resume: generated,
            combined_text: augmented.combined_text,
        });
    }
    Ok(out)
}

// ======================================================
// Centroid example selection
// ======================================================

/// Among `pool_ids`, the resume with the highest mean cosine to the
/// accepted set (embeddings are unit vectors, so mean dot product). Ties
/// break by ascending doc id. This picks the most "central" accepted-style
/// resume to serve as a prompt example.
pub fn select_centroid_resume(
    accepted_ids: &[String],
    pool_ids: &[String],
    store: &EmbeddingStore,
) -> Result<String> {
    if accepted_ids.is_empty() {
        return Err(Error::InvalidParam {
            name: "accepted_ids".into(),
            detail: "no accepted resumes to compare against".into(),
        });
    }
    if pool_ids.is_empty() {
        return Err(Error::InvalidParam {
            name: "pool_ids".into(),
            detail: "empty candidate pool".into(),
        });
    }
    let accepted: Vec<&[f64]> =
        accepted_ids.iter().map(|id| store.vector(id)).collect::<Result<_>>()?;
    let mut best: Option<(f64, &String)> = None;
    for id in pool_ids {
        let v = store.vector(id)?;
        let mean: f64 = accepted
            .iter()
            .map(|a| a.iter().zip(v).map(|(x, y)| x * y).sum::<f64>())
            .sum::<f64>()
            / accepted.len() as f64;
        best = match best {
            None => Some((mean, id)),
            Some((bm, bid)) => {
                if mean > bm || (mean == bm && id < bid) {
                    Some((mean, id))
                } else {
                    Some((bm, bid))
                }
            }
        };
    }
    Ok(best.expect("pool is non-empty").1.clone())
}
