//! Declarative multi-stage runs over sharded corpora with per-shard
//! checkpointing and per-stage accounting.

mod checkpoint;
mod config;
mod report;
mod run;

pub use checkpoint::{write_atomic, Checkpoint, StageProgress};
pub use config::{PipelineConfig, StageConfig, StageKind, ENV_PREFIX};
pub use report::{report, Counts, ShardStats, StageReport, TableRow};
pub use run::{run, stage_dir, RunOptions, CHECKPOINT_FILE, DEFAULT_DOCS_PER_SHARD};

use crate::corpus::CorpusError;
use crate::dedup::DedupError;
use crate::heuristics::HeuristicsError;
use crate::langid::LangIdError;
use crate::tokenizer::TokenizerError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    LangId(#[from] LangIdError),
    #[error(transparent)]
    Heuristics(#[from] HeuristicsError),
    #[error(transparent)]
    Dedup(#[from] DedupError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error("checkpoint was written by a different configuration (hash {found}, current {current}); rerun without --resume")]
    ConfigHashMismatch { found: String, current: String },
    #[error("run interrupted: {0}")]
    Interrupted(String),
}

impl PipelineError {
    /// 2 for configuration problems, 3 for data problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::ConfigHashMismatch { .. } => 2,
            PipelineError::Heuristics(HeuristicsError::Config(_)) => 2,
            PipelineError::Tokenizer(TokenizerError::Config(_) | TokenizerError::VocabTooSmall { .. }) => 2,
            PipelineError::Dedup(DedupError::InvalidParams(_)) => 2,
            PipelineError::Interrupted(_) => 1,
            _ => 3,
        }
    }
}
