//! Dense-retrieval matching between resumes and job posts.
//!
//! The pipeline: flatten documents to text, embed them once with a frozen
//! provider, then rank with temperature-scaled cosine over a small trainable
//! linear adapter. Training is contrastive over labeled pairs with in-batch
//! and mined hard negatives; mining, augmentation, lexical scoring, and
//! ranking/bias evaluation round out the toolkit. Every random choice is
//! seeded, so runs are reproducible bit for bit.

pub mod adapter;
pub mod augment;
pub mod corpus;
pub mod embedder;
pub mod error;
pub mod evalreport;
pub mod hashing;
pub mod jsonl;
pub mod miner;
pub mod scorer;
pub mod seeding;
pub mod trainer;

pub use error::{Error, Result};
