use unicode_general_category::{get_general_category, GeneralCategory as G};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::DedupError;
use crate::corpus::{DocId, Document};

/// Words per shingle.
pub const SHINGLE_WIDTH: usize = 5;
const SHINGLE_HASH_SEED: u64 = 0x5348_494e_474c_4535;

/// Sorted, distinct 64-bit hashes of a document's word windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub doc_id: DocId,
    pub shingles: Vec<u64>,
}

impl ShingleSet {
    pub fn len(&self) -> usize {
        self.shingles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shingles.is_empty()
    }

    /// Exact Jaccard similarity by merge-intersection of the sorted sets.
    pub fn jaccard(&self, other: &ShingleSet) -> f64 {
        let (a, b) = (&self.shingles, &other.shingles);
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let union = a.len() + b.len() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

fn is_stripped(c: char) -> bool {
    matches!(
        get_general_category(c),
        G::ConnectorPunctuation
            | G::DashPunctuation
            | G::OpenPunctuation
            | G::ClosePunctuation
            | G::InitialPunctuation
            | G::FinalPunctuation
            | G::OtherPunctuation
            | G::MathSymbol
            | G::CurrencySymbol
            | G::ModifierSymbol
            | G::OtherSymbol
    )
}

/// Lowercased words with punctuation and symbols removed; words that
/// become empty are dropped.
pub fn normalized_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.chars().filter(|&c| !is_stripped(c)).flat_map(char::to_lowercase).collect::<String>())
        .filter(|w| !w.is_empty())
        .collect()
}

fn hash_window(words: &[String]) -> u64 {
    let mut buf = Vec::with_capacity(words.iter().map(|w| w.len() + 1).sum());
    for w in words {
        buf.extend_from_slice(w.as_bytes());
        // 0xFF never occurs in UTF-8, so word boundaries are unambiguous.
        buf.push(0xFF);
    }
    xxh3_64_with_seed(&buf, SHINGLE_HASH_SEED)
}

pub fn shingle_text(id: DocId, text: &str) -> Result<ShingleSet, DedupError> {
    let words = normalized_words(text);
    if words.is_empty() {
        return Err(DedupError::EmptyDocument(id));
    }
    let mut shingles: Vec<u64> = if words.len() < SHINGLE_WIDTH {
        vec![hash_window(&words)]
    } else {
        words.windows(SHINGLE_WIDTH).map(hash_window).collect()
    };
    shingles.sort_unstable();
    shingles.dedup();
    Ok(ShingleSet { doc_id: id, shingles })
}

pub fn shingle(doc: &Document) -> Result<ShingleSet, DedupError> {
    shingle_text(doc.id, &doc.text)
}
