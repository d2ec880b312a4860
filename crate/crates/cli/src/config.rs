//! Run configuration: one JSON file drives every stage, so a run is
//! reproducible from the config and the input corpus alone.

use std::path::Path;

use fitrank_core::corpus::Split;
use fitrank_core::embedder::providers::{
    EmbeddingProvider, HashProvider, HttpEmbedProvider, SyntheticProvider,
};
use fitrank_core::miner::{MineStrategy, PercentileRange};
use fitrank_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

/// Embedding backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    /// Offline tokens-to-Gaussian bag embedder; needs no network.
    Hash {
        dim: usize,
    },
    /// Decodes coordinate tokens from generated corpora through a fixed
    /// random distortion.
    Synthetic {
        latent_dim: usize,
        #[serde(default = "default_strength")]
        strength: f64,
    },
    /// Remote embedding service.
    Http {
        base_url: String,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
        #[serde(default = "default_retries")]
        retries: u32,
    },
}

fn default_strength() -> f64 {
    1.0
}
fn default_batch_size() -> usize {
    16
}
fn default_in_flight() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}

impl ProviderConfig {
    pub fn build(&self, seed: u64) -> fitrank_core::Result<Box<dyn EmbeddingProvider>> {
        match self {
            ProviderConfig::Hash { dim } => Ok(Box::new(HashProvider::new(*dim, seed))),
            ProviderConfig::Synthetic { latent_dim, strength } => {
                Ok(Box::new(SyntheticProvider::with_strength(*latent_dim, seed, *strength)))
            }
            ProviderConfig::Http { base_url, batch_size, max_in_flight, retries } => {
                let provider = HttpEmbedProvider::new("http", base_url.clone())?
                    .with_batch_size(*batch_size)
                    .with_max_in_flight(*max_in_flight)
                    .with_retry(*retries, std::time::Duration::from_millis(200));
                Ok(Box::new(provider))
            }
        }
    }
}

/// Hard-negative mining settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub strategy: MineStrategy,
    /// Percentile band `(lo, hi]` for runner-up mining.
    pub range: [f64; 2],
    pub n_per_anchor: usize,
    /// Experimental: rank the percentile band over all anchors jointly
    /// instead of per anchor.
    pub global: bool,
    /// Top-k for the lexical strategy.
    pub bm25_k: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            strategy: MineStrategy::RunnerUp,
            range: [3.0, 4.0],
            n_per_anchor: 2,
            global: false,
            bm25_k: 5,
        }
    }
}

impl MiningConfig {
    pub fn percentile_range(&self) -> fitrank_core::Result<PercentileRange> {
        PercentileRange::new(self.range[0], self.range[1])
    }
}

/// LLM backend for job augmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlmConfig {
    /// Offline stand-in that answers with the target job's own text.
    Echo,
    /// Offline stand-in that always answers with the given text.
    Fixed { text: String },
    /// Remote chat-completion service.
    Http { base_url: String },
}

/// Job augmentation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Which document side gets augmented; only "jobs" is supported.
    pub target: String,
    pub n_shots: usize,
    pub model: String,
    pub temperature: f64,
    pub llm: LlmConfig,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: false,
            target: "jobs".into(),
            n_shots: 1,
            model: "mock".into(),
            temperature: 0.2,
            llm: LlmConfig::Echo,
        }
    }
}

/// Evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub k: usize,
    pub split: String,
    pub bias_attribute: Option<String>,
    pub bias_top_n: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k: 10, split: "test".into(), bias_attribute: None, bias_top_n: 10 }
    }
}

/// The full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Score temperature: cosine similarities are divided by this.
    pub temperature: f64,
    pub provider: ProviderConfig,
    pub train: TrainConfig,
    pub mining: MiningConfig,
    pub augment: AugmentConfig,
    pub eval: EvalConfig,
    /// Mining-and-retraining rounds in the pipeline; round 1 is always
    /// in-batch only, so 2 is the smallest value that mines.
    pub iterations: usize,
    /// Experimental: warm-start each round from the previous round's
    /// weights instead of identity.
    pub continue_from_previous: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            temperature: 0.05,
            provider: ProviderConfig::Hash { dim: 64 },
            train: TrainConfig::default(),
            mining: MiningConfig::default(),
            augment: AugmentConfig::default(),
            eval: EvalConfig::default(),
            iterations: 2,
            continue_from_previous: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("cannot parse config {}: {e}", path.display()))
    }

    pub fn eval_split(&self) -> Result<Split, String> {
        match self.eval.split.as_str() {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("eval.split must be train, valid, or test, got {other:?}")),
        }
    }

    /// Collect every problem with the configuration instead of stopping at
    /// the first, so one failed run reports them all.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            problems.push(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            ));
        }
        match &self.provider {
            ProviderConfig::Hash { dim } if *dim == 0 => {
                problems.push("provider.dim must be positive".into());
            }
            ProviderConfig::Synthetic { latent_dim, strength } => {
                if *latent_dim == 0 {
                    problems.push("provider.latent_dim must be positive".into());
                }
                if !(strength.is_finite() && *strength >= 0.0) {
                    problems.push(format!(
                        "provider.strength must be non-negative and finite, got {strength}"
                    ));
                }
            }
            ProviderConfig::Http { base_url, batch_size, max_in_flight, .. } => {
                if base_url.is_empty() {
                    problems.push("provider.base_url must not be empty".into());
                }
                if *batch_size == 0 {
                    problems.push("provider.batch_size must be positive".into());
                }
                if *max_in_flight == 0 {
                    problems.push("provider.max_in_flight must be positive".into());
                }
            }
            _ => {}
        }
        if let Err(e) = self.train.validate() {
            problems.push(format!("train: {e}"));
        }
        if let Err(e) = self.mining.percentile_range() {
            problems.push(format!("mining.range: {e}"));
        }
        if self.mining.n_per_anchor == 0 {
            problems.push("mining.n_per_anchor must be positive".into());
        }
        if self.mining.bm25_k == 0 {
            problems.push("mining.bm25_k must be positive".into());
        }
        if self.augment.target != "jobs" {
            problems.push(format!(
                "augment.target must be \"jobs\" (resumes are never augmented), got {:?}",
                self.augment.target
            ));
        }
        if self.augment.enabled && self.augment.n_shots == 0 {
            problems.push("augment.n_shots must be positive".into());
        }
        if self.augment.enabled && !(0.0..=2.0).contains(&self.augment.temperature) {
            problems.push(format!(
                "augment.temperature must be in [0, 2], got {}",
                self.augment.temperature
            ));
        }
        if self.eval.k == 0 {
            problems.push("eval.k must be positive".into());
        }
        if self.eval.bias_top_n == 0 {
            problems.push("eval.bias_top_n must be positive".into());
        }
        if let Err(e) = self.eval_split() {
            problems.push(e);
        }
        if self.iterations == 0 {
            problems.push("iterations must be positive".into());
        }
        problems
    }
}
