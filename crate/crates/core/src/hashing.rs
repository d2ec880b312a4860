//! Content hashing.
//!
//! SHA-256 hex digests identify texts for the embedding cache, prompts for
//! the generation ledger, and artifact files for run manifests.

use sha2::{Digest, Sha256};

/// Hex SHA-256 digest of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Hex SHA-256 digest of a text.
pub fn content_hash(text: &str) -> String {
    sha256_hex(text.as_bytes())
}
