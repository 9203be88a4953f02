//! Per-document quality features.
//!
//! Character fractions use two universes: line features divide by the
//! characters of the trimmed non-empty lines, n-gram features divide by the
//! characters of the whitespace words. Both are invariant under trailing
//! whitespace changes.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ppl::CharBigramModel;
use crate::corpus::Document;
use crate::lang::{is_letter, is_number, is_sentence_punctuation};

/// n for the most-common-n-gram coverage features.
pub const TOP_NGRAM_ORDERS: [usize; 3] = [2, 3, 4];
/// n for the duplicated-n-gram coverage features.
pub const DUP_NGRAM_ORDERS: [usize; 7] = [5, 6, 7, 8, 9, 10, 11];

const BULLETS: [char; 5] = ['•', '‣', '▪', '-', '*'];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub token_count: u64,
    pub mean_word_length: f64,
    pub mean_sentence_length: f64,
    pub symbol_to_word_ratio: f64,
    pub ppl_score: f64,
    pub frac_duplicate_lines: f64,
    pub frac_chars_in_duplicate_lines: f64,
    /// Indexed by [`TOP_NGRAM_ORDERS`].
    pub frac_chars_top_ngram: [f64; 3],
    /// Indexed by [`DUP_NGRAM_ORDERS`].
    pub frac_chars_in_dup_ngrams: [f64; 7],
    pub frac_lines_ellipsis: f64,
    pub frac_lines_bullet: f64,
}

impl FeatureVector {
    pub fn top_ngram(&self, n: usize) -> Option<f64> {
        TOP_NGRAM_ORDERS
            .iter()
            .position(|&k| k == n)
            .map(|i| self.frac_chars_top_ngram[i])
    }

    pub fn dup_ngram(&self, n: usize) -> Option<f64> {
        DUP_NGRAM_ORDERS
            .iter()
            .position(|&k| k == n)
            .map(|i| self.frac_chars_in_dup_ngrams[i])
    }
}

pub fn compute_features(doc: &Document, lm: Option<&CharBigramModel>) -> FeatureVector {
    features_of_text(&doc.text, lm)
}

pub fn features_of_text(text: &str, lm: Option<&CharBigramModel>) -> FeatureVector {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return FeatureVector::default();
    }
    let word_lens: Vec<usize> = words.iter().map(|w| w.chars().count()).collect();
    let word_chars: usize = word_lens.iter().sum();
    let token_count = words.len() as u64;

    let sentences = text
        .split(['\u{0964}', '.', '!', '?', '\n'])
        .filter(|s| s.split_whitespace().next().is_some())
        .count()
        .max(1);

    let symbols = text
        .chars()
        .filter(|&c| !(c.is_whitespace() || is_letter(c) || is_number(c) || is_sentence_punctuation(c)))
        .count();

    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let line_chars: usize = lines.iter().map(|l| l.chars().count()).sum();
    let (dup_lines, dup_line_chars) = duplicate_lines(&lines);
    let n_lines = lines.len().max(1) as f64;

    let top = TOP_NGRAM_ORDERS.map(|n| top_ngram_coverage(&words, &word_lens, n) as f64 / word_chars as f64);
    let dup = DUP_NGRAM_ORDERS.map(|n| dup_ngram_coverage(&words, &word_lens, n) as f64 / word_chars as f64);

    FeatureVector {
        token_count,
        mean_word_length: word_chars as f64 / token_count as f64,
        mean_sentence_length: token_count as f64 / sentences as f64,
        symbol_to_word_ratio: symbols as f64 / token_count as f64,
        ppl_score: lm.map_or(0.0, |m| m.perplexity(text)),
        frac_duplicate_lines: dup_lines as f64 / n_lines,
        frac_chars_in_duplicate_lines: if line_chars == 0 {
            0.0
        } else {
            dup_line_chars as f64 / line_chars as f64
        },
        frac_chars_top_ngram: top,
        frac_chars_in_dup_ngrams: dup,
        frac_lines_ellipsis: lines.iter().filter(|l| l.ends_with("...") || l.ends_with('…')).count() as f64
            / n_lines,
        frac_lines_bullet: lines
            .iter()
            .filter(|l| l.chars().next().is_some_and(|c| BULLETS.contains(&c)))
            .count() as f64
            / n_lines,
    }
}

/// Lines that repeat an earlier line, and their characters.
fn duplicate_lines(lines: &[&str]) -> (usize, usize) {
    let mut seen = HashSet::with_capacity(lines.len());
    let mut n = 0;
    let mut chars = 0;
    for l in lines {
        if !seen.insert(*l) {
            n += 1;
            chars += l.chars().count();
        }
    }
    (n, chars)
}

/// Characters covered by occurrences of the most frequent word n-gram.
/// Returns 0 when no n-gram occurs twice. Among equally frequent n-grams the
/// one covering the most characters wins.
fn top_ngram_coverage(words: &[&str], lens: &[usize], n: usize) -> usize {
    if words.len() < n {
        return 0;
    }
    let mut positions: HashMap<&[&str], Vec<usize>> = HashMap::new();
    for (i, w) in words.windows(n).enumerate() {
        positions.entry(w).or_default().push(i);
    }
    let max = positions.values().map(Vec::len).max().unwrap_or(0);
    if max < 2 {
        return 0;
    }
    positions
        .values()
        .filter(|p| p.len() == max)
        .map(|starts| covered_chars(starts, lens, n))
        .max()
        .unwrap_or(0)
}

/// Characters of words inside any n-gram that occurs at least twice.
fn dup_ngram_coverage(words: &[&str], lens: &[usize], n: usize) -> usize {
    if words.len() < n {
        return 0;
    }
    let mut counts: HashMap<&[&str], u32> = HashMap::new();
    for w in words.windows(n) {
        *counts.entry(w).or_default() += 1;
    }
    let starts: Vec<usize> = words
        .windows(n)
        .enumerate()
        .filter(|(_, w)| counts[w] >= 2)
        .map(|(i, _)| i)
        .collect();
    covered_chars(&starts, lens, n)
}

fn covered_chars(starts: &[usize], lens: &[usize], n: usize) -> usize {
    let mut covered = vec![false; lens.len()];
    for &s in starts {
        covered[s..s + n].iter_mut().for_each(|c| *c = true);
    }
    covered.iter().zip(lens).filter(|(c, _)| **c).map(|(_, l)| l).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_words() {
        let f = features_of_text("ab cd", None);
        assert_eq!(f.token_count, 2);
        assert_eq!(f.mean_word_length, 2.0);
        assert_eq!(f.mean_sentence_length, 2.0);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(features_of_text("", None), FeatureVector::default());
        assert_eq!(features_of_text(" \n\t ", None), FeatureVector::default());
    }

    #[test]
    fn bullet_fraction() {
        let f = features_of_text("• one\ntwo\nthree\nfour", None);
        assert_eq!(f.frac_lines_bullet, 0.25);
    }

    #[test]
    fn ellipsis_fraction() {
        let f = features_of_text("wait...\nmore…\nend.", None);
        assert!((f.frac_lines_ellipsis - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_lines_counted_after_trim() {
        let f = features_of_text("abc\n  abc  \nxy", None);
        assert!((f.frac_duplicate_lines - 1.0 / 3.0).abs() < 1e-12);
        assert!((f.frac_chars_in_duplicate_lines - 3.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn sentences_split_on_danda() {
        let f = features_of_text("एक दो तीन। चार पाँच छह। सात", None);
        assert_eq!(f.token_count, 7);
        assert!((f.mean_sentence_length - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn symbols_exclude_letters_digits_punctuation() {
        // '#' and '@' are symbols; '!' , '।' and digits are not.
        let f = features_of_text("नमस्ते # 12 @ ठीक।", None);
        assert_eq!(f.token_count, 5);
        assert!((f.symbol_to_word_ratio - 2.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn trailing_whitespace_invariance() {
        let a = features_of_text("a b c d e\nf g a b c d e\n• x...", None);
        let b = features_of_text("a b c d e   \nf g a b c d e\t\n• x...  ", None);
        assert_eq!(a, b);
    }
}
