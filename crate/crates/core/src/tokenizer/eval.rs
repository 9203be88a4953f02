use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use super::model::{TokenizerModel, MARKER_ID};
use super::TokenizerError;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalCounts {
    pub words: u64,
    pub tokens: u64,
    pub exact_words: u64,
}

impl EvalCounts {
    pub fn token_to_word_ratio(&self) -> f64 {
        self.tokens as f64 / self.words as f64
    }

    pub fn exact_score(&self) -> f64 {
        self.exact_words as f64 / self.words as f64
    }
}

/// Encodes every whitespace word on its own, caching repeated words. A
/// boundary marker emitted as its own token is not counted.
pub fn evaluate<S: AsRef<str>>(model: &TokenizerModel, corpus: &[S]) -> Result<EvalCounts, TokenizerError> {
    let mut cache: HashMap<&str, (u64, bool)> = HashMap::new();
    let mut c = EvalCounts::default();
    for t in corpus {
        for w in t.as_ref().split_whitespace() {
            let (n, exact) = match cache.get(w) {
                Some(&v) => v,
                None => {
                    let ids = model.encode(w);
                    let n = ids.iter().filter(|&&id| id != MARKER_ID).count() as u64;
                    let v = (n, model.decode(&ids)? == w);
                    cache.insert(w, v);
                    v
                }
            };
            c.words += 1;
            c.tokens += n;
            c.exact_words += exact as u64;
        }
    }
    if c.words == 0 {
        return Err(TokenizerError::EmptyCorpus);
    }
    Ok(c)
}

pub fn token_to_word_ratio<S: AsRef<str>>(model: &TokenizerModel, corpus: &[S]) -> Result<f64, TokenizerError> {
    Ok(evaluate(model, corpus)?.token_to_word_ratio())
}

/// Fraction of words that survive an encode/decode round trip unchanged.
pub fn exact_score<S: AsRef<str>>(model: &TokenizerModel, corpus: &[S]) -> Result<f64, TokenizerError> {
    Ok(evaluate(model, corpus)?.exact_score())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub tokenizer: String,
    pub lang: String,
    pub tokens: u64,
    pub words: u64,
    pub ratio: f64,
}

/// Reads `tokenizer<TAB>lang<TAB>tokens<TAB>words` rows produced by an
/// external tokenizer. Blank lines and `#` comments are skipped.
pub fn parse_external_counts(src: &str) -> Result<Vec<CompareRow>, TokenizerError> {
    let mut rows = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || TokenizerError::Config(format!("external counts line {}: `{line}`", i + 1));
        let f: Vec<&str> = line.split('\t').collect();
        let [name, lang, tokens, words] = f[..] else { return Err(bad()) };
        let tokens: u64 = tokens.trim().parse().map_err(|_| bad())?;
        let words: u64 = words.trim().parse().map_err(|_| bad())?;
        if words == 0 {
            return Err(bad());
        }
        rows.push(CompareRow {
            tokenizer: name.to_string(),
            lang: lang.to_string(),
            tokens,
            words,
            ratio: tokens as f64 / words as f64,
        });
    }
    Ok(rows)
}

/// Ratio of every model on every language corpus, followed by `external`.
pub fn compare_tokenizers<S: AsRef<str>>(
    models: &[(String, &TokenizerModel)],
    corpora: &BTreeMap<String, Vec<S>>,
    external: &[CompareRow],
) -> Result<Vec<CompareRow>, TokenizerError> {
    let mut rows = Vec::new();
    for (name, m) in models {
        for (lang, texts) in corpora {
            let c = evaluate(m, texts)?;
            rows.push(CompareRow {
                tokenizer: name.clone(),
                lang: lang.clone(),
                tokens: c.tokens,
                words: c.words,
                ratio: c.token_to_word_ratio(),
            });
        }
    }
    rows.extend_from_slice(external);
    Ok(rows)
}

/// Languages down, tokenizers across, ratios to two decimals.
pub fn format_comparison(rows: &[CompareRow]) -> String {
    let mut names: Vec<&str> = Vec::new();
    let mut langs: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.tokenizer.as_str()) {
            names.push(&r.tokenizer);
        }
        if !langs.contains(&r.lang.as_str()) {
            langs.push(&r.lang);
        }
    }
    let cell: HashMap<(&str, &str), f64> = rows.iter().map(|r| ((r.lang.as_str(), r.tokenizer.as_str()), r.ratio)).collect();
    let lw = langs.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(4);
    let widths: Vec<usize> = names.iter().map(|n| n.chars().count().max(6)).collect();
    let mut out = String::new();
    let _ = write!(out, "{:<lw$}", "lang");
    for (n, w) in names.iter().zip(&widths) {
        let _ = write!(out, "  {n:>w$}");
    }
    out.push('\n');
    for l in &langs {
        let _ = write!(out, "{l:<lw$}");
        for (n, w) in names.iter().zip(&widths) {
            match cell.get(&(*l, *n)) {
                Some(r) => {
                    let _ = write!(out, "  {r:>w$.2}");
                }
                None => {
                    let _ = write!(out, "  {:>w$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{train_bpe, TrainConfig};

    fn model(corpus: &[&str], vocab: usize, fallback: bool) -> TokenizerModel {
        let cfg = TrainConfig {
            vocab_size: vocab,
            character_coverage: 1.0,
            byte_fallback: fallback,
            ..Default::default()
        };
        train_bpe(corpus, &cfg).unwrap()
    }

    #[test]
    fn whole_word_tokens_give_ratio_one() {
        let m = model(&["abc abc xyz xyz"], 1000, false);
        assert_eq!(token_to_word_ratio(&m, &["abc xyz abc"]).unwrap(), 1.0);
        assert_eq!(exact_score(&m, &["abc xyz"]).unwrap(), 1.0);
    }

    #[test]
    fn unmerged_words_count_characters() {
        // No pair repeats, so every word is the marker plus its characters.
        let m = model(&["abc def"], 1000, false);
        assert!(m.merges().is_empty());
        assert_eq!(token_to_word_ratio(&m, &["abc fed"]).unwrap(), 3.0);
    }

    #[test]
    fn exact_score_counts_unknown_words() {
        let m = model(&["abc abc"], 1000, false);
        assert_eq!(exact_score(&m, &["abc abc abz"]).unwrap(), 2.0 / 3.0);
        let m = model(&["abc abc"], 1000, true);
        assert_eq!(exact_score(&m, &["abc abc abz"]).unwrap(), 1.0);
    }

    #[test]
    fn external_counts_and_table() {
        let ext = parse_external_counts("# name lang tokens words\ngpt\thi\t300\t100\n").unwrap();
        assert_eq!(ext[0].ratio, 3.0);
        assert!(parse_external_counts("gpt\thi\t3").is_err());
        let m = model(&["abc abc"], 1000, false);
        let corpora = BTreeMap::from([("hi".to_string(), vec!["abc"])]);
        let rows = compare_tokenizers(&[("ours".into(), &m)], &corpora, &ext).unwrap();
        let t = format_comparison(&rows);
        assert_eq!(t.lines().count(), 2);
        assert!(t.contains("1.00") && t.contains("3.00"));
    }
}
