use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use super::model::{TokenizerModel, UNK_ID};
use super::train::{train_bpe, TrainConfig};
use super::{TokenizerError, MARKER};

/// Basic Latin, the nine Indic script blocks, Vedic Extensions, ZWNJ and ZWJ.
pub const DEFAULT_ALLOWED: [RangeInclusive<u32>; 12] = [
    0x0000..=0x007F,
    0x0900..=0x097F,
    0x0980..=0x09FF,
    0x0A00..=0x0A7F,
    0x0A80..=0x0AFF,
    0x0B00..=0x0B7F,
    0x0B80..=0x0BFF,
    0x0C00..=0x0C7F,
    0x0C80..=0x0CFF,
    0x0D00..=0x0D7F,
    0x1CD0..=0x1CFF,
    0x200C..=0x200D,
];

/// Character allowlist plus explicit bans. Bans win over allows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharFilter {
    allow: Vec<RangeInclusive<u32>>,
    ban: Vec<RangeInclusive<u32>>,
    banned_tokens: BTreeSet<String>,
}

impl Default for CharFilter {
    fn default() -> Self {
        CharFilter {
            allow: DEFAULT_ALLOWED.to_vec(),
            ban: Vec::new(),
            banned_tokens: BTreeSet::new(),
        }
    }
}

fn parse_cp(s: &str) -> Option<u32> {
    let h = s.strip_prefix("U+").or_else(|| s.strip_prefix("u+"))?;
    u32::from_str_radix(h, 16).ok()
}

fn parse_range(s: &str) -> Option<RangeInclusive<u32>> {
    match s.split_once(['-', '.']) {
        Some((a, b)) => {
            let (a, b) = (parse_cp(a)?, parse_cp(b.trim_start_matches('.'))?);
            (a <= b).then_some(a..=b)
        }
        None => parse_cp(s).map(|c| c..=c),
    }
}

impl CharFilter {
    /// Allows nothing; combine with [`parse_overrides`](Self::parse_overrides).
    pub fn empty() -> CharFilter {
        CharFilter {
            allow: Vec::new(),
            ban: Vec::new(),
            banned_tokens: BTreeSet::new(),
        }
    }

    /// Permits every character; only explicit bans apply.
    pub fn permissive() -> CharFilter {
        CharFilter {
            allow: vec![0..=0x10FFFF],
            ..CharFilter::empty()
        }
    }

    /// Lines of `allow U+XXXX[-U+YYYY]`, `ban U+XXXX[-U+YYYY]` or
    /// `ban-token <text>`; `#` starts a comment.
    pub fn parse_overrides(mut self, src: &str) -> Result<CharFilter, TokenizerError> {
        for (i, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || TokenizerError::Config(format!("char filter line {}: `{}`", i + 1, raw.trim()));
            let (kw, rest) = line.split_once(char::is_whitespace).ok_or_else(bad)?;
            let rest = rest.trim();
            match kw {
                "allow" => self.allow.push(parse_range(rest).ok_or_else(bad)?),
                "ban" => self.ban.push(parse_range(rest).ok_or_else(bad)?),
                "ban-token" => {
                    self.banned_tokens.insert(rest.to_string());
                }
                _ => return Err(bad()),
            }
        }
        Ok(self)
    }

    pub fn ban_token(&mut self, token: impl Into<String>) {
        self.banned_tokens.insert(token.into());
    }

    pub fn allows(&self, c: char) -> bool {
        let c = c as u32;
        self.allow.iter().any(|r| r.contains(&c)) && !self.ban.iter().any(|r| r.contains(&c))
    }

    /// True for tokens with a disallowed character or on the token ban list.
    /// The boundary marker is structural and never banned by itself.
    pub fn bans_token(&self, token: &str) -> bool {
        self.banned_tokens.contains(token) || token.chars().any(|c| c != MARKER && !self.allows(c))
    }
}

/// Disables every banned piece of `dummy`. Errors if no alphabet character
/// survives.
pub fn ban_pieces(dummy: &mut TokenizerModel, filter: &CharFilter) -> Result<usize, TokenizerError> {
    let banned: Vec<u32> = dummy
        .enabled_pieces()
        .filter(|(_, t)| filter.bans_token(t))
        .map(|(id, _)| id)
        .collect();
    let n = banned.len();
    dummy.disable(banned);
    if dummy.alphabet().iter().all(|&c| dummy.char_id(c).is_none()) {
        return Err(TokenizerError::EmptyAlphabet);
    }
    Ok(n)
}

/// Drops every word that encodes to UNK under `dummy`. Lines are kept;
/// words inside a line are re-joined by single spaces and emptied lines
/// vanish.
pub fn clean_text(dummy: &TokenizerModel, text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let mut first = true;
        let start = out.len();
        for w in line.split_whitespace() {
            if dummy.encode(w).contains(&UNK_ID) {
                continue;
            }
            if !first {
                out.push(' ');
            }
            out.push_str(w);
            first = false;
        }
        if out.len() > start {
            out.push('\n');
        }
    }
    if out.ends_with('\n') {
        out.pop();
    }
    out
}

/// Bans pieces on `dummy` (which must not use byte fallback) and cleans
/// each text.
pub fn clean_corpus<S: AsRef<str>>(
    dummy: &mut TokenizerModel,
    filter: &CharFilter,
    corpus: &[S],
) -> Result<Vec<String>, TokenizerError> {
    if dummy.byte_fallback() {
        return Err(TokenizerError::Config("cleaning requires a model without byte fallback".into()));
    }
    ban_pieces(dummy, filter)?;
    Ok(corpus
        .iter()
        .map(|t| clean_text(dummy, t.as_ref()))
        .filter(|t| !t.is_empty())
        .collect())
}

#[derive(Debug, Clone)]
pub struct CleanTrainOutcome {
    pub model: TokenizerModel,
    /// The byte-fallback-free model with banned pieces disabled.
    pub dummy: TokenizerModel,
    pub cleaned: Vec<String>,
    pub banned_pieces: usize,
    pub words_before: u64,
    pub words_after: u64,
}

/// Dummy model without byte fallback, ban and clean, then the final model
/// on the cleaned corpus with `cfg` as given.
pub fn clean_train<S: AsRef<str> + Sync>(
    corpus: &[S],
    cfg: &TrainConfig,
    filter: &CharFilter,
) -> Result<CleanTrainOutcome, TokenizerError> {
    let dummy_cfg = TrainConfig {
        byte_fallback: false,
        ..cfg.clone()
    };
    let mut dummy = train_bpe(corpus, &dummy_cfg)?;
    let banned_pieces = ban_pieces(&mut dummy, filter)?;
    let cleaned: Vec<String> = corpus
        .iter()
        .map(|t| clean_text(&dummy, t.as_ref()))
        .filter(|t| !t.is_empty())
        .collect();
    if cleaned.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let count = |c: &mut dyn Iterator<Item = &str>| c.map(|t| t.split_whitespace().count() as u64).sum::<u64>();
    let words_before = count(&mut corpus.iter().map(AsRef::as_ref));
    let words_after = count(&mut cleaned.iter().map(String::as_str));
    let model = train_bpe(&cleaned, cfg)?;
    Ok(CleanTrainOutcome {
        model,
        dummy,
        cleaned,
        banned_pieces,
        words_before,
        words_after,
    })
}
