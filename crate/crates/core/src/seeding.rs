//! Deterministic RNG streams.
//!
//! Every random choice in this crate draws from a ChaCha8 stream whose key is
//! derived from a run seed plus a purpose tag (and, where sampling is
//! per-anchor, the anchor id). Streams are therefore independent of each
//! other and of iteration order: adding documents or reordering anchors never
//! shifts another stream's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A ChaCha8 stream keyed by (seed, tag).
pub fn rng_stream(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// A ChaCha8 stream keyed by (seed, tag, item id), for per-item sampling.
pub fn rng_stream_for(seed: u64, tag: &str, id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(tag.as_bytes());
    hasher.update([0u8]);
    hasher.update(id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
