//! Document model, web-archive ingestion, HTML text extraction and sharded
//! corpus I/O.

mod document;
pub mod html;
pub mod ingest;
pub mod shard;
pub mod warc;

use std::path::PathBuf;

pub use document::{normalize_text, DocId, Document, Source};
pub use html::{extract, extract_text, Extraction};
pub use shard::{read_shard, read_shard_all, write_shard, write_shard_file, Shard};
pub use warc::{open_warc, RecordType, WarcReader, WarcRecord, WarcStats};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported WARC compression `{0}`; only plain or per-record gzip WARC/1.0 is accepted")]
    UnsupportedCompression(&'static str),
    #[error("shard {0} is incomplete (partial marker present)")]
    PartialShard(PathBuf),
    #[error("{path}:{line}: bad document record: {message}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
