#![allow(dead_code)]

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refinery::corpus::{Document, Source};
use refinery::heuristics::FilterConfig;
use refinery::{Lang, Script};
use unicode_general_category::{get_general_category, GeneralCategory as G};

pub const INDIC: [Lang; 11] = [
    Lang::Hi,
    Lang::Bn,
    Lang::Ta,
    Lang::Ml,
    Lang::Mr,
    Lang::Te,
    Lang::Kn,
    Lang::Gu,
    Lang::Pa,
    Lang::Or,
    Lang::As,
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn block(script: Script) -> std::ops::RangeInclusive<u32> {
    match script {
        Script::Devanagari => 0x0900..=0x097F,
        Script::Bengali => 0x0980..=0x09FF,
        Script::Gurmukhi => 0x0A00..=0x0A7F,
        Script::Gujarati => 0x0A80..=0x0AFF,
        Script::Oriya => 0x0B00..=0x0B7F,
        Script::Tamil => 0x0B80..=0x0BFF,
        Script::Telugu => 0x0C00..=0x0C7F,
        Script::Kannada => 0x0C80..=0x0CFF,
        Script::Malayalam => 0x0D00..=0x0D7F,
        _ => 0x61..=0x7A,
    }
}

/// Base letters (consonants, independent vowels) and dependent vowel signs,
/// restricted to the classic consonant and sign rows of the block.
pub fn letters(lang: Lang) -> (Vec<char>, Vec<char>) {
    let r = block(lang.script());
    if lang.script() == Script::Latin {
        return (r.filter_map(char::from_u32).collect(), Vec::new());
    }
    let base = *r.start();
    let cons = (base + 0x15..=base + 0x39)
        .filter_map(char::from_u32)
        .filter(|&c| get_general_category(c) == G::OtherLetter)
        .collect();
    let signs = (base + 0x3E..=base + 0x4C)
        .filter_map(char::from_u32)
        .filter(|&c| matches!(get_general_category(c), G::NonspacingMark | G::SpacingMark))
        .collect();
    (cons, signs)
}

pub fn terminator(lang: Lang) -> &'static str {
    match lang.script() {
        Script::Devanagari | Script::Bengali | Script::Gurmukhi | Script::Oriya => "\u{0964}",
        _ => ".",
    }
}

/// Word length midpoint that satisfies the default thresholds.
pub fn target_word_len(lang: Lang) -> f64 {
    FilterConfig::default()
        .thresholds(lang)
        .map(|t| (t.mean_word_length[0] + t.mean_word_length[1]) / 2.0)
        .unwrap_or(5.0)
}

/// Zipfian language over a synthetic vocabulary in the language's script.
/// Each language has its own letter distribution.
pub struct LangGen {
    pub lang: Lang,
    pub vocab: Vec<String>,
    zipf: WeightedIndex<f64>,
}

impl LangGen {
    pub fn new(lang: Lang, vocab_size: usize, seed: u64) -> LangGen {
        let mut r = rng(seed ^ (lang as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (cons, signs) = letters(lang);
        let cw = WeightedIndex::new(cons.iter().map(|_| r.gen_range(0.05f64..1.0).powi(3))).unwrap();
        let target = target_word_len(lang);
        let mut seen = HashSet::new();
        let mut vocab = Vec::with_capacity(vocab_size);
        while vocab.len() < vocab_size {
            let len = r.gen_range((target - 1.5).max(2.0)..=target + 1.5).round() as usize;
            let mut w = String::new();
            let mut n = 0;
            while n < len {
                w.push(cons[cw.sample(&mut r)]);
                n += 1;
                if n < len && !signs.is_empty() && r.gen_bool(0.5) {
                    w.push(signs[r.gen_range(0..signs.len())]);
                    n += 1;
                }
            }
            if seen.insert(w.clone()) {
                vocab.push(w);
            }
        }
        let zipf = WeightedIndex::new((1..=vocab_size).map(|k| 1.0 / (k as f64).powf(1.05))).unwrap();
        LangGen { lang, vocab, zipf }
    }

    pub fn word<R: Rng>(&self, r: &mut R) -> &str {
        &self.vocab[self.zipf.sample(r)]
    }

    pub fn sentence<R: Rng>(&self, r: &mut R, words: usize) -> String {
        let mut s = String::new();
        for i in 0..words {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(self.word(r));
        }
        s.push_str(terminator(self.lang));
        s
    }

    /// About `words` words in sentences of 6 to 14 words, three sentences
    /// per line.
    pub fn text<R: Rng>(&self, r: &mut R, words: usize) -> String {
        let mut out = String::new();
        let mut n = 0;
        let mut k = 0;
        while n < words {
            let len = r.gen_range(6..=14).min(words - n).max(1);
            if k > 0 {
                out.push(if k % 3 == 0 { '\n' } else { ' ' });
            }
            out.push_str(&self.sentence(r, len));
            n += len;
            k += 1;
        }
        out
    }

    /// Lines of text totalling at least `bytes` bytes.
    pub fn corpus<R: Rng>(&self, r: &mut R, bytes: usize) -> Vec<String> {
        let mut lines = Vec::new();
        let mut total = 0;
        while total < bytes {
            let n = r.gen_range(6..=14);
            let l = self.sentence(r, n);
            total += l.len() + 1;
            lines.push(l);
        }
        lines
    }
}

pub fn doc(url: &str, fetched_at: i64, text: &str) -> Document {
    Document::new(url, fetched_at, text, Source::Web)
}

/// Labelled `(lang, text)` examples for every Indic language.
pub fn labeled(gens: &[LangGen], per_lang: usize, seed: u64) -> Vec<(Lang, String)> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for g in gens {
        for _ in 0..per_lang {
            out.push((g.lang, g.text(&mut r, 60)));
        }
    }
    out
}

pub fn indic_gens(vocab: usize, seed: u64) -> Vec<LangGen> {
    INDIC.iter().map(|&l| LangGen::new(l, vocab, seed)).collect()
}
