use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use unicode_normalization::UnicodeNormalization;
use xxhash_rust::xxh3::Xxh3;

use crate::lang::Lang;

/// Stable 128-bit identifier derived from a document's url, fetch time and text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocId(pub u128);

impl DocId {
    pub fn derive(url: &str, fetched_at: i64, text: &str) -> DocId {
        let mut h = Xxh3::new();
        h.update(&(url.len() as u64).to_le_bytes());
        h.update(url.as_bytes());
        h.update(&fetched_at.to_le_bytes());
        h.update(&(text.len() as u64).to_le_bytes());
        h.update(text.as_bytes());
        DocId(h.digest128())
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl FromStr for DocId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u128::from_str_radix(s, 16).map(DocId)
    }
}

impl Serialize for DocId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DocId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Web,
    Book,
    News,
    Wiki,
    Other,
}

/// One unit of text flowing through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    pub url: String,
    pub fetched_at: i64,
    pub lang: Lang,
    pub lang_confidence: f64,
    pub text: String,
    pub source: Source,
}

impl Document {
    /// Builds an unlabelled document. The text is NFC-normalized and stripped
    /// of NUL characters before the id is derived.
    pub fn new(url: impl Into<String>, fetched_at: i64, text: &str, source: Source) -> Document {
        let url = url.into();
        let text = normalize_text(text);
        Document {
            id: DocId::derive(&url, fetched_at, &text),
            url,
            fetched_at,
            lang: Lang::Und,
            lang_confidence: 0.0,
            text,
            source,
        }
    }

    /// Sets the language label. `und` forces confidence 0, and confidence 0
    /// forces `und`.
    pub fn set_lang(&mut self, lang: Lang, confidence: f64) {
        let confidence = if confidence.is_nan() { 0.0 } else { confidence.clamp(0.0, 1.0) };
        if lang == Lang::Und || confidence == 0.0 {
            self.lang = Lang::Und;
            self.lang_confidence = 0.0;
        } else {
            self.lang = lang;
            self.lang_confidence = confidence;
        }
    }

    pub fn with_lang(mut self, lang: Lang, confidence: f64) -> Document {
        self.set_lang(lang, confidence);
        self
    }

    /// Whitespace-delimited word count.
    pub fn word_count(&self) -> u64 {
        self.text.split_whitespace().count() as u64
    }
}

/// NFC normalization with NUL removal.
pub fn normalize_text(text: &str) -> String {
    text.nfc().filter(|&c| c != '\0').collect()
}
