//! Heuristic HTML-to-text extraction.
//!
//! A single forward scan over the decoded markup. Content inside script,
//! style, navigation, header and footer elements is dropped, block elements
//! become line breaks, entities are decoded and whitespace is collapsed.

use encoding_rs::{Encoding, UTF_16BE, UTF_16LE, UTF_8};
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Extraction {
    pub text: String,
    /// Undecodable byte sequences replaced with U+FFFD.
    pub replacements: usize,
}

/// Extracts clean text from an HTML payload, sniffing the encoding from the
/// markup alone.
pub fn extract_text(html: &[u8]) -> String {
    extract(html, None).text
}

/// Extracts clean text, taking the charset of an HTTP Content-Type header
/// into account. Detection order: BOM, Content-Type, meta charset, UTF-8.
pub fn extract(html: &[u8], content_type: Option<&str>) -> Extraction {
    let (encoding, bom_len) = match Encoding::for_bom(html) {
        Some((enc, len)) => (enc, len),
        None => {
            if looks_binary(html) {
                return Extraction::default();
            }
            let enc = content_type
                .and_then(charset_label)
                .and_then(|l| Encoding::for_label(l.as_bytes()))
                .or_else(|| meta_charset(html))
                .map(|e| if e == UTF_16LE || e == UTF_16BE { UTF_8 } else { e })
                .unwrap_or(UTF_8);
            (enc, 0)
        }
    };
    let bytes = &html[bom_len..];
    let (decoded, replacements) = if encoding == UTF_8 {
        decode_utf8_counting(bytes)
    } else {
        let (cow, _) = encoding.decode_without_bom_handling(bytes);
        let n = cow.chars().filter(|&c| c == '\u{FFFD}').count();
        (cow.into_owned(), n)
    };
    Extraction {
        text: markup_to_text(&decoded),
        replacements,
    }
}

fn decode_utf8_counting(bytes: &[u8]) -> (String, usize) {
    let mut out = String::with_capacity(bytes.len());
    let mut replaced = 0;
    for chunk in bytes.utf8_chunks() {
        out.push_str(chunk.valid());
        if !chunk.invalid().is_empty() {
            out.push('\u{FFFD}');
            replaced += 1;
        }
    }
    (out, replaced)
}

const BINARY_MAGIC: &[&[u8]] = &[
    b"\x89PNG",
    b"\xFF\xD8\xFF",
    b"GIF8",
    b"%PDF",
    b"PK\x03\x04",
    b"\x1f\x8b",
    b"RIFF",
    b"\x00\x00\x01\x00",
];

fn looks_binary(bytes: &[u8]) -> bool {
    if BINARY_MAGIC.iter().any(|m| bytes.starts_with(m)) {
        return true;
    }
    let head = &bytes[..bytes.len().min(1024)];
    if head.contains(&0) {
        return true;
    }
    let control = head
        .iter()
        .filter(|&&b| b < 0x20 && !matches!(b, b'\t' | b'\n' | b'\r' | 0x0C))
        .count();
    !head.is_empty() && control * 10 > head.len()
}

fn charset_label(content_type: &str) -> Option<String> {
    let lower = content_type.to_ascii_lowercase();
    let at = lower.find("charset=")?;
    let rest = &lower[at + "charset=".len()..];
    let label: String = rest
        .trim_start_matches(['"', '\''])
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | ':' | '.'))
        .collect();
    (!label.is_empty()).then_some(label)
}

fn meta_charset(html: &[u8]) -> Option<&'static Encoding> {
    let head = &html[..html.len().min(2048)];
    let text = String::from_utf8_lossy(head).to_ascii_lowercase();
    let mut from = 0;
    while let Some(i) = text[from..].find("<meta") {
        let start = from + i;
        let end = text[start..].find('>').map_or(text.len(), |e| start + e);
        if let Some(enc) = charset_label(&text[start..end]).and_then(|l| Encoding::for_label(l.as_bytes())) {
            return Some(enc);
        }
        from = end;
    }
    None
}

/// Elements whose raw text content is never markup.
const RAW_TEXT: &[&str] = &["script", "style", "xmp", "textarea"];

/// Elements dropped together with everything they contain.
const SKIPPED: &[&str] = &[
    "nav", "header", "footer", "noscript", "template", "svg", "iframe", "select", "button", "aside",
    "object", "canvas", "math", "form",
];

const BLOCK: &[&str] = &[
    "address", "article", "blockquote", "body", "br", "caption", "dd", "details", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "h1", "h2", "h3", "h4", "h5", "h6", "hr", "html", "li", "main",
    "ol", "p", "pre", "section", "summary", "table", "tbody", "thead", "tfoot", "title", "tr", "ul",
];

const CELL: &[&str] = &["td", "th"];

struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
    end: usize,
}

/// Parses a tag starting at `start` (which points at `<`). Returns `None` when
/// the `<` does not open a tag and should be treated as text.
fn parse_tag(s: &str, start: usize) -> Option<Tag> {
    let bytes = s.as_bytes();
    let mut i = start + 1;
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    if !bytes.get(i).is_some_and(|b| b.is_ascii_alphabetic()) {
        return None;
    }
    let name_start = i;
    while bytes.get(i).is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'-' || *b == b':') {
        i += 1;
    }
    let name = s[name_start..i].to_ascii_lowercase();
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => {
                let self_closing = i > start + 1 && bytes[i - 1] == b'/';
                return Some(Tag {
                    name,
                    closing,
                    self_closing,
                    end: i + 1,
                });
            }
            None => {}
        }
        i += 1;
    }
    Some(Tag {
        name,
        closing,
        self_closing: false,
        end: bytes.len(),
    })
}

fn find_ci(hay: &str, from: usize, needle: &str) -> Option<usize> {
    let h = hay.as_bytes();
    let n = needle.as_bytes();
    (from..h.len().saturating_sub(n.len() - 1)).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn markup_to_text(s: &str) -> String {
    let mut raw = String::with_capacity(s.len() / 2);
    let mut skip_depth = 0usize;
    let mut in_head = false;
    let mut i = 0;
    let bytes = s.as_bytes();
    while i < bytes.len() {
        if bytes[i] != b'<' {
            let end = s[i..].find('<').map_or(s.len(), |e| i + e);
            if skip_depth == 0 && !in_head {
                raw.push_str(&html_escape::decode_html_entities(&s[i..end]));
            }
            i = end;
            continue;
        }
        if s[i..].starts_with("<!--") {
            i = s[i + 4..].find("-->").map_or(s.len(), |e| i + 4 + e + 3);
            continue;
        }
        if s[i..].starts_with("<!") || s[i..].starts_with("<?") {
            i = s[i..].find('>').map_or(s.len(), |e| i + e + 1);
            continue;
        }
        let Some(tag) = parse_tag(s, i) else {
            if skip_depth == 0 && !in_head {
                raw.push('<');
            }
            i += 1;
            continue;
        };
        i = tag.end;
        let name = tag.name.as_str();
        if !tag.closing && RAW_TEXT.contains(&name) {
            let close = format!("</{name}");
            i = match find_ci(s, i, &close) {
                Some(c) => s[c..].find('>').map_or(s.len(), |e| c + e + 1),
                None => s.len(),
            };
            continue;
        }
        match name {
            "head" => in_head = !tag.closing,
            "body" if !tag.closing => in_head = false,
            _ => {}
        }
        if SKIPPED.contains(&name) {
            if tag.closing {
                skip_depth = skip_depth.saturating_sub(1);
            } else if !tag.self_closing {
                skip_depth += 1;
            }
            continue;
        }
        if BLOCK.contains(&name) {
            raw.push('\n');
        } else if CELL.contains(&name) {
            raw.push(' ');
        }
    }
    collapse(&raw).nfc().collect()
}

/// Collapses whitespace runs inside lines, trims lines and drops empty ones.
fn collapse(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for line in raw.split(['\n', '\r', '\u{2028}', '\u{2029}', '\u{000B}', '\u{000C}']) {
        let mut first = true;
        for word in line.split_whitespace() {
            if first {
                if !out.is_empty() {
                    out.push('\n');
                }
                first = false;
            } else {
                out.push(' ');
            }
            out.push_str(word);
        }
    }
    out
}
