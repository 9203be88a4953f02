//! Streaming reader for WARC/1.0 files, plain or gzip-compressed per record.
//!
//! Records are parsed one at a time from a buffered stream, so memory use is
//! bounded by the largest record. Malformed records are skipped and counted;
//! the reader resynchronises on the next `WARC/1.` version line.

use std::io::{self, BufRead, BufReader, Read};

use flate2::bufread::MultiGzDecoder;
use serde::Serialize;

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordType {
    Response,
    Request,
    Metadata,
    Other,
}

impl RecordType {
    fn parse(s: &str) -> RecordType {
        match s.trim().to_ascii_lowercase().as_str() {
            "response" => RecordType::Response,
            "request" => RecordType::Request,
            "metadata" => RecordType::Metadata,
            _ => RecordType::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarcRecord {
    pub record_type: RecordType,
    pub target_uri: String,
    /// Epoch seconds, 0 when the WARC-Date header is absent or unparseable.
    pub date: i64,
    pub content_type: String,
    pub payload: Vec<u8>,
}

/// Counters accumulated while reading; consumed into stage reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WarcStats {
    pub records: u64,
    pub malformed: u64,
    pub truncated: bool,
}

const MAX_PREALLOC: u64 = 64 << 20;

/// Opens a WARC stream, detecting per-record gzip from the magic bytes.
pub fn open_warc<'a, R: Read + 'a>(
    reader: R,
) -> Result<WarcReader<Box<dyn BufRead + 'a>>, CorpusError> {
    let mut buf = BufReader::with_capacity(64 * 1024, reader);
    let head = buf.fill_buf()?;
    let inner: Box<dyn BufRead + 'a> = if head.starts_with(&[0x1f, 0x8b]) {
        Box::new(BufReader::with_capacity(64 * 1024, MultiGzDecoder::new(buf)))
    } else if head.starts_with(b"BZh") {
        return Err(CorpusError::UnsupportedCompression("bzip2"));
    } else if head.starts_with(&[0xFD, b'7', b'z', b'X', b'Z', 0x00]) {
        return Err(CorpusError::UnsupportedCompression("xz"));
    } else if head.starts_with(&[0x28, 0xB5, 0x2F, 0xFD]) {
        return Err(CorpusError::UnsupportedCompression("zstd"));
    } else if head.starts_with(b"PK\x03\x04") {
        return Err(CorpusError::UnsupportedCompression("zip"));
    } else {
        Box::new(buf)
    };
    Ok(WarcReader::new(inner))
}

/// Iterator over the records of an uncompressed WARC stream.
pub struct WarcReader<R> {
    inner: R,
    stats: WarcStats,
    pending_version: bool,
    done: bool,
    line: Vec<u8>,
}

enum Step {
    Record(WarcRecord),
    Skipped,
    Eof,
}

impl<R: BufRead> WarcReader<R> {
    pub fn new(inner: R) -> Self {
        WarcReader {
            inner,
            stats: WarcStats::default(),
            pending_version: false,
            done: false,
            line: Vec::with_capacity(256),
        }
    }

    pub fn stats(&self) -> WarcStats {
        self.stats
    }

    fn read_line(&mut self) -> io::Result<bool> {
        self.line.clear();
        Ok(self.inner.read_until(b'\n', &mut self.line)? > 0)
    }

    fn line_is_blank(&self) -> bool {
        self.line == b"\r\n" || self.line == b"\n"
    }

    fn line_is_version(&self) -> bool {
        self.line.starts_with(b"WARC/1.")
    }

    /// Skips lines until the next version line, which is left pending.
    fn resync(&mut self) -> io::Result<bool> {
        loop {
            if !self.read_line()? {
                return Ok(false);
            }
            if self.line_is_version() {
                self.pending_version = true;
                return Ok(true);
            }
        }
    }

    fn step(&mut self) -> io::Result<Step> {
        if !self.pending_version {
            loop {
                if !self.read_line()? {
                    return Ok(Step::Eof);
                }
                if !self.line_is_blank() {
                    break;
                }
            }
            if !self.line_is_version() {
                self.stats.malformed += 1;
                return Ok(if self.resync()? { Step::Skipped } else { Step::Eof });
            }
        }
        self.pending_version = false;

        let mut record_type = RecordType::Other;
        let mut target_uri = String::new();
        let mut date = 0i64;
        let mut content_type = String::new();
        let mut content_length: Option<u64> = None;
        let mut bad_header = false;
        loop {
            if !self.read_line()? {
                self.stats.truncated = true;
                return Ok(Step::Eof);
            }
            if self.line_is_blank() {
                break;
            }
            let line = String::from_utf8_lossy(&self.line);
            let Some((name, value)) = line.split_once(':') else {
                bad_header = true;
                continue;
            };
            let value = value.trim();
            match name.trim().to_ascii_lowercase().as_str() {
                "warc-type" => record_type = RecordType::parse(value),
                "warc-target-uri" => target_uri = value.trim_matches(['<', '>']).to_string(),
                "warc-date" => date = parse_warc_date(value),
                "content-type" => content_type = value.to_string(),
                "content-length" => content_length = value.parse().ok(),
                _ => {}
            }
        }
        let Some(len) = content_length.filter(|_| !bad_header) else {
            self.stats.malformed += 1;
            return Ok(if self.resync()? { Step::Skipped } else { Step::Eof });
        };

        // Trust the declared length up to a guard so a bogus header cannot
        // reserve unbounded memory; beyond it the buffer grows as read.
        let mut payload = Vec::with_capacity(len.min(MAX_PREALLOC) as usize);
        (&mut self.inner).take(len).read_to_end(&mut payload)?;
        if (payload.len() as u64) < len {
            self.stats.truncated = true;
            return Ok(Step::Eof);
        }

        // Trailer: two CRLF lines.
        for _ in 0..2 {
            if !self.read_line()? {
                self.stats.truncated = true;
                return Ok(Step::Eof);
            }
            if !self.line_is_blank() {
                self.stats.malformed += 1;
                if self.line_is_version() {
                    self.pending_version = true;
                    return Ok(Step::Skipped);
                }
                return Ok(if self.resync()? { Step::Skipped } else { Step::Eof });
            }
        }

        self.stats.records += 1;
        Ok(Step::Record(WarcRecord {
            record_type,
            target_uri,
            date,
            content_type,
            payload,
        }))
    }
}

impl<R: BufRead> Iterator for WarcReader<R> {
    type Item = Result<WarcRecord, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            match self.step() {
                Ok(Step::Record(r)) => return Some(Ok(r)),
                Ok(Step::Skipped) => continue,
                Ok(Step::Eof) => self.done = true,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
        }
        None
    }
}

fn parse_warc_date(value: &str) -> i64 {
    chrono::DateTime::parse_from_rfc3339(value)
        .map(|d| d.timestamp())
        .unwrap_or(0)
}

/// Splits an HTTP response payload into its Content-Type header and body.
/// Payloads without an HTTP status line are returned whole as the body.
pub fn split_http_response(payload: &[u8]) -> (Option<String>, &[u8]) {
    if !payload.starts_with(b"HTTP/") {
        return (None, payload);
    }
    let (head, body) = match find(payload, b"\r\n\r\n") {
        Some(i) => (&payload[..i], &payload[i + 4..]),
        None => match find(payload, b"\n\n") {
            Some(i) => (&payload[..i], &payload[i + 2..]),
            None => (payload, &payload[payload.len()..]),
        },
    };
    let content_type = String::from_utf8_lossy(head).lines().find_map(|l| {
        let (name, value) = l.split_once(':')?;
        name.trim()
            .eq_ignore_ascii_case("content-type")
            .then(|| value.trim().to_string())
    });
    (content_type, body)
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}
