//! Newline-delimited JSON shards with a manifest sidecar.
//!
//! A shard is committed by writing `{file}.tmp`, renaming it into place and
//! removing the `{file}.partial` marker created before the write started. A
//! marker left on disk means the shard is incomplete and must be discarded.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::Xxh3;

use super::{CorpusError, Document};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub path: PathBuf,
    pub count: u64,
    /// Size of the file on disk.
    pub bytes: u64,
    /// xxh3-64 of the file bytes.
    #[serde(with = "hex_u64")]
    pub checksum: u64,
}

impl Shard {
    /// Recomputes the checksum and size from disk and compares.
    pub fn verify(&self) -> Result<bool, CorpusError> {
        let (bytes, checksum) = file_checksum(&self.path)?;
        Ok(bytes == self.bytes && checksum == self.checksum)
    }
}

mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
    }
}

pub fn file_checksum(path: &Path) -> Result<(u64, u64), CorpusError> {
    let mut f = File::open(path)?;
    let mut h = Xxh3::new();
    let mut buf = vec![0u8; 64 * 1024];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((total, h.digest()))
}

/// Name of shard `index` under `prefix`: `{prefix}-{00000}.jsonl[.gz]`.
pub fn shard_path(prefix: &Path, index: usize, gzip: bool) -> PathBuf {
    let name = prefix.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = if gzip { "jsonl.gz" } else { "jsonl" };
    prefix.with_file_name(format!("{name}-{index:05}.{ext}"))
}

pub fn manifest_path(prefix: &Path) -> PathBuf {
    let name = prefix.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    prefix.with_file_name(format!("{name}.manifest"))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn partial_marker(path: &Path) -> PathBuf {
    sibling(path, ".partial")
}

struct HashingWriter<W> {
    inner: W,
    hasher: Xxh3,
    written: u64,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes one shard file atomically. Compression follows the `.gz` extension.
pub fn write_shard_file<I>(path: &Path, docs: I) -> Result<Shard, CorpusError>
where
    I: IntoIterator<Item = Document>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let marker = partial_marker(path);
    let tmp = sibling(path, ".tmp");
    fs::write(&marker, b"")?;

    let file = File::create(&tmp)?;
    let mut out = HashingWriter {
        inner: BufWriter::new(file),
        hasher: Xxh3::new(),
        written: 0,
    };
    let gzip = path.extension().is_some_and(|e| e == "gz");
    let count = if gzip {
        let mut enc = GzEncoder::new(&mut out, flate2::Compression::default());
        let n = write_docs(&mut enc, docs)?;
        enc.finish()?;
        n
    } else {
        write_docs(&mut out, docs)?
    };
    out.flush()?;
    out.inner.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    fs::rename(&tmp, path)?;
    fs::remove_file(&marker)?;
    Ok(Shard {
        path: path.to_path_buf(),
        count,
        bytes: out.written,
        checksum: out.hasher.digest(),
    })
}

fn write_docs<W: Write, I: IntoIterator<Item = Document>>(w: &mut W, docs: I) -> Result<u64, CorpusError> {
    let mut count = 0;
    for doc in docs {
        serde_json::to_writer(&mut *w, &doc)?;
        w.write_all(b"\n")?;
        count += 1;
    }
    Ok(count)
}

/// Splits `docs` into shards of at most `max_docs_per_shard` documents named
/// after `prefix`, and writes the `{prefix}.manifest` sidecar.
pub fn write_shard<I>(
    docs: I,
    prefix: &Path,
    max_docs_per_shard: usize,
    gzip: bool,
) -> Result<Vec<Shard>, CorpusError>
where
    I: IntoIterator<Item = Document>,
{
    if max_docs_per_shard == 0 {
        return Err(CorpusError::InvalidArgument("max_docs_per_shard must be at least 1".into()));
    }
    let mut shards = Vec::new();
    let mut docs = docs.into_iter().peekable();
    while docs.peek().is_some() {
        let chunk: Vec<Document> = docs.by_ref().take(max_docs_per_shard).collect();
        let path = shard_path(prefix, shards.len(), gzip);
        shards.push(write_shard_file(&path, chunk)?);
    }
    write_manifest(&manifest_path(prefix), &shards)?;
    Ok(shards)
}

pub fn write_manifest(path: &Path, shards: &[Shard]) -> Result<(), CorpusError> {
    let mut body = String::new();
    for s in shards {
        body.push_str(&serde_json::to_string(s)?);
        body.push('\n');
    }
    let tmp = sibling(path, ".tmp");
    fs::write(&tmp, body)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<Shard>, CorpusError> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Streams the documents of one shard file.
pub fn read_shard(path: &Path) -> Result<ShardReader, CorpusError> {
    if partial_marker(path).exists() {
        return Err(CorpusError::PartialShard(path.to_path_buf()));
    }
    let file = File::open(path)?;
    let inner: Box<dyn BufRead> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    Ok(ShardReader {
        lines: inner.lines(),
        line_no: 0,
        path: path.to_path_buf(),
    })
}

pub fn read_shard_all(path: &Path) -> Result<Vec<Document>, CorpusError> {
    read_shard(path)?.collect()
}

pub struct ShardReader {
    lines: io::Lines<Box<dyn BufRead>>,
    line_no: usize,
    path: PathBuf,
}

impl Iterator for ShardReader {
    type Item = Result<Document, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(serde_json::from_str(&line).map_err(|e| CorpusError::BadRecord {
                path: self.path.clone(),
                line: self.line_no,
                message: e.to_string(),
            }));
        }
    }
}

/// Deletes every shard in `dir` that still carries a partial marker, along
/// with the marker and any temporary file. Returns the discarded paths.
pub fn discard_partials(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let mut discarded = Vec::new();
    if !dir.exists() {
        return Ok(discarded);
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        let name = p.to_string_lossy();
        if let Some(target) = name.strip_suffix(".partial") {
            let target = PathBuf::from(target);
            for q in [&target, &sibling(&target, ".tmp")] {
                if q.exists() {
                    fs::remove_file(q)?;
                }
            }
            fs::remove_file(&p)?;
            discarded.push(target);
        } else if name.ends_with(".tmp") && p.is_file() {
            fs::remove_file(&p)?;
        }
    }
    Ok(discarded)
}
