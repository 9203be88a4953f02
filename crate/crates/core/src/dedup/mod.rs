//! Near-duplicate removal: word shingles, MinHash signatures, banded LSH
//! and union-find clustering inside time-ordered batches.

mod batch;
mod lsh;
mod minhash;
mod shingle;

pub use batch::{
    batch_planner, dedup_batch, plan_batch_indices, Cluster, DedupBatch, DedupOutcome, DedupParams, DedupReport, DEFAULT_BATCH_CAPACITY,
    DEFAULT_DEDUP_SEED, DEFAULT_THRESHOLD,
};
pub use lsh::{lsh_candidates, LshIndex, LshParams, DEFAULT_BANDS, DEFAULT_ROWS};
pub use minhash::{minhash, MinHashSignature, MinHasher, DEFAULT_PERMUTATIONS, MERSENNE_61};
pub use shingle::{normalized_words, shingle, shingle_text, ShingleSet, SHINGLE_WIDTH};

use crate::corpus::DocId;

#[derive(Debug, thiserror::Error)]
pub enum DedupError {
    #[error("document {0} has no words to shingle")]
    EmptyDocument(DocId),
    #[error("signature has {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("signatures were computed with different seeds")]
    SeedMismatch,
    #[error("invalid dedup parameters: {0}")]
    InvalidParams(String),
}
