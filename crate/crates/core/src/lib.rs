//! Corpus refinement and tokenizer training for multilingual Indic
//! pre-training data.
//!
//! The crate is organised as a sequence of stages: [`corpus`] ingestion and
//! extraction, [`langid`] labelling, [`heuristics`] quality filtering,
//! [`dedup`] near-duplicate removal and [`tokenizer`] training, tied together
//! by the checkpointed [`pipeline`].

pub mod corpus;
pub mod dedup;
pub mod heuristics;
pub mod lang;
pub mod langid;
pub mod pipeline;
pub mod text;
pub mod tokenizer;

pub use lang::{Lang, Script};
