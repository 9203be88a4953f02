//! Turns raw inputs (WARC files, plain-text books, existing shards) into
//! documents.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;

use super::warc::split_http_response;
use super::{extract, open_warc, read_shard, CorpusError, Document, RecordType, Source, WarcStats};

/// Per-input accounting for the extraction stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub candidates: u64,
    pub documents: u64,
    pub non_html: u64,
    pub empty_text: u64,
    pub replacements: u64,
    pub warc: WarcStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Warc,
    Text,
    Shard,
}

impl InputKind {
    pub fn of(path: &Path) -> Option<InputKind> {
        let name = path.file_name()?.to_string_lossy().to_ascii_lowercase();
        if name.ends_with(".warc") || name.ends_with(".warc.gz") {
            Some(InputKind::Warc)
        } else if name.ends_with(".jsonl") || name.ends_with(".jsonl.gz") {
            Some(InputKind::Shard)
        } else if name.ends_with(".txt") {
            Some(InputKind::Text)
        } else {
            None
        }
    }
}

fn is_html(content_type: Option<&str>) -> bool {
    match content_type {
        None => true,
        Some(ct) => {
            let ct = ct.to_ascii_lowercase();
            ct.contains("html") || ct.starts_with("text/plain")
        }
    }
}

/// Extracts one web document per HTML response record.
pub fn warc_documents(path: &Path) -> Result<(Vec<Document>, IngestStats), CorpusError> {
    let mut reader = open_warc(BufReader::new(fs::File::open(path)?))?;
    let mut stats = IngestStats::default();
    let mut docs = Vec::new();
    for record in reader.by_ref() {
        let record = record?;
        if record.record_type != RecordType::Response {
            continue;
        }
        stats.candidates += 1;
        let (content_type, body) = split_http_response(&record.payload);
        if !is_html(content_type.as_deref()) {
            stats.non_html += 1;
            continue;
        }
        let ex = extract(body, content_type.as_deref());
        stats.replacements += ex.replacements as u64;
        if ex.text.is_empty() {
            stats.empty_text += 1;
            continue;
        }
        docs.push(Document::new(record.target_uri, record.date, &ex.text, Source::Web));
    }
    stats.warc = reader.stats();
    stats.documents = docs.len() as u64;
    Ok((docs, stats))
}

/// A plain-text file becomes a single book document with whitespace
/// normalized per line.
pub fn text_document(path: &Path) -> Result<(Vec<Document>, IngestStats), CorpusError> {
    let bytes = fs::read(path)?;
    let raw = String::from_utf8_lossy(&bytes);
    let text: Vec<String> = raw
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect();
    let mut stats = IngestStats {
        candidates: 1,
        ..Default::default()
    };
    if text.is_empty() {
        stats.empty_text = 1;
        return Ok((Vec::new(), stats));
    }
    stats.documents = 1;
    Ok((vec![Document::new("", 0, &text.join("\n"), Source::Book)], stats))
}

/// Reads any supported input into documents.
pub fn ingest(path: &Path) -> Result<(Vec<Document>, IngestStats), CorpusError> {
    match InputKind::of(path) {
        Some(InputKind::Warc) => warc_documents(path),
        Some(InputKind::Text) => text_document(path),
        Some(InputKind::Shard) => {
            let docs: Vec<Document> = read_shard(path)?.collect::<Result<_, _>>()?;
            let n = docs.len() as u64;
            Ok((
                docs,
                IngestStats {
                    candidates: n,
                    documents: n,
                    ..Default::default()
                },
            ))
        }
        None => Err(CorpusError::InvalidArgument(format!(
            "unsupported input file {}",
            path.display()
        ))),
    }
}
