//! Character n-gram language model (orders 1–3) with additive smoothing.
//!
//! Each language stores smoothed log-probabilities for the n-grams it was
//! trained on plus one log-probability shared by every unseen n-gram of that
//! order. The vocabulary of an order is the union of all languages' n-grams
//! plus a single unseen bucket, so each language's distribution sums to one.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::Serialize;

use super::script::detect_script;
use super::LangIdError;
use crate::lang::{is_letter, Lang, Script};

pub const MAGIC: &[u8; 4] = b"LIDM";
pub const FORMAT_VERSION: u32 = 1;
pub const MAX_ORDER: usize = 3;
pub const SMOOTHING: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderTable {
    pub total: u64,
    pub log_probs: HashMap<String, f64>,
    pub log_unseen: f64,
}

impl OrderTable {
    fn log_prob(&self, gram: &str) -> f64 {
        self.log_probs.get(gram).copied().unwrap_or(self.log_unseen)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageTable {
    pub lang: Lang,
    pub log_prior: f64,
    pub orders: [OrderTable; MAX_ORDER],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangModel {
    pub version: u32,
    pub alpha: f64,
    /// Vocabulary size per order, including the unseen bucket.
    pub vocab_sizes: [u64; MAX_ORDER],
    pub languages: Vec<LanguageTable>,
}

/// Outcome of classifying one text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub lang: Lang,
    pub confidence: f64,
}

/// Appends the character n-grams of `text` to `out` via `f(order, gram)`.
/// Text is lowercased and split into letter runs; each run is padded with a
/// space on both sides so word-initial and word-final grams are distinct.
pub fn for_each_ngram(text: &str, mut f: impl FnMut(usize, &str)) {
    let lower = text.to_lowercase();
    let mut word: Vec<char> = Vec::with_capacity(32);
    let mut gram = String::with_capacity(16);
    let mut flush = |word: &mut Vec<char>| {
        if word.is_empty() {
            return;
        }
        let mut padded = Vec::with_capacity(word.len() + 2);
        padded.push(' ');
        padded.append(word);
        padded.push(' ');
        for n in 1..=MAX_ORDER {
            for w in padded.windows(n) {
                if n == 1 && w[0] == ' ' {
                    continue;
                }
                gram.clear();
                gram.extend(w.iter());
                f(n, &gram);
            }
        }
    };
    for c in lower.chars() {
        if is_letter(c) {
            word.push(c);
        } else {
            flush(&mut word);
        }
    }
    flush(&mut word);
}

/// Trains a model from `(language, text)` pairs. Priors are uniform over the
/// languages present.
pub fn train_langid<I, S>(labeled: I) -> Result<LangModel, LangIdError>
where
    I: IntoIterator<Item = (Lang, S)>,
    S: AsRef<str>,
{
    let mut counts: BTreeMap<Lang, [HashMap<String, u64>; MAX_ORDER]> = BTreeMap::new();
    for (lang, text) in labeled {
        if lang == Lang::Und {
            return Err(LangIdError::UndeterminedLabel);
        }
        let tables = counts.entry(lang).or_default();
        for_each_ngram(text.as_ref(), |n, g| {
            *tables[n - 1].entry(g.to_string()).or_default() += 1;
        });
    }
    if counts.is_empty() {
        return Err(LangIdError::EmptyCorpus);
    }
    if let Some((lang, _)) = counts.iter().find(|(_, t)| t[0].is_empty()) {
        return Err(LangIdError::EmptyLanguage(*lang));
    }

    let mut vocab_sizes = [0u64; MAX_ORDER];
    for (n, size) in vocab_sizes.iter_mut().enumerate() {
        let mut union: Vec<&String> = counts.values().flat_map(|t| t[n].keys()).collect();
        union.sort_unstable();
        union.dedup();
        *size = union.len() as u64 + 1;
    }

    let log_prior = -(counts.len() as f64).ln();
    let languages = counts
        .into_iter()
        .map(|(lang, tables)| {
            let orders = std::array::from_fn(|n| {
                let total: u64 = tables[n].values().sum();
                let denom = (total as f64 + SMOOTHING * vocab_sizes[n] as f64).ln();
                OrderTable {
                    total,
                    log_probs: tables[n]
                        .iter()
                        .map(|(g, &c)| (g.clone(), (c as f64 + SMOOTHING).ln() - denom))
                        .collect(),
                    log_unseen: SMOOTHING.ln() - denom,
                }
            });
            LanguageTable {
                lang,
                log_prior,
                orders,
            }
        })
        .collect();

    Ok(LangModel {
        version: FORMAT_VERSION,
        alpha: SMOOTHING,
        vocab_sizes,
        languages,
    })
}

impl LangModel {
    pub fn languages(&self) -> impl Iterator<Item = Lang> + '_ {
        self.languages.iter().map(|t| t.lang)
    }

    /// Log-likelihood of `text` under every language, in model order.
    pub fn log_likelihoods(&self, text: &str) -> Vec<(Lang, f64)> {
        let mut scores: Vec<f64> = self.languages.iter().map(|t| t.log_prior).collect();
        for_each_ngram(text, |n, g| {
            for (score, table) in scores.iter_mut().zip(&self.languages) {
                *score += table.orders[n - 1].log_prob(g);
            }
        });
        self.languages.iter().map(|t| t.lang).zip(scores).collect()
    }

    /// Top language and confidence. Only languages written in the text's
    /// dominant script compete; the confidence is their posterior times the
    /// share of letters in that script.
    pub fn classify(&self, text: &str) -> Classification {
        let profile = detect_script(text);
        let dominant = profile.dominant();
        let und = Classification {
            lang: Lang::Und,
            confidence: 0.0,
        };
        if profile.letters == 0 || dominant == Script::Other {
            return und;
        }
        let candidates: Vec<&LanguageTable> = self
            .languages
            .iter()
            .filter(|t| t.lang.script() == dominant)
            .collect();
        if candidates.is_empty() {
            return und;
        }
        let mut scores: Vec<f64> = candidates.iter().map(|t| t.log_prior).collect();
        for_each_ngram(text, |n, g| {
            for (score, table) in scores.iter_mut().zip(&candidates) {
                *score += table.orders[n - 1].log_prob(g);
            }
        });
        let (best, &max) = scores
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, (i, s)| if *s > *acc.1 { (i, s) } else { acc });
        let norm: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let posterior = 1.0 / norm;
        let confidence = (posterior * profile.fraction(dominant)).clamp(0.0, 1.0);
        if confidence == 0.0 {
            return und;
        }
        Classification {
            lang: candidates[best].lang,
            confidence,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), LangIdError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(self.version)?;
        w.write_f64::<LittleEndian>(self.alpha)?;
        for &v in &self.vocab_sizes {
            w.write_u64::<LittleEndian>(v)?;
        }
        w.write_u32::<LittleEndian>(self.languages.len() as u32)?;
        for t in &self.languages {
            write_str(&mut w, t.lang.code())?;
            w.write_f64::<LittleEndian>(t.log_prior)?;
            for o in &t.orders {
                w.write_u64::<LittleEndian>(o.total)?;
                w.write_f64::<LittleEndian>(o.log_unseen)?;
            }
        }
        // n-gram table, sorted for a byte-stable file
        for t in &self.languages {
            for o in &t.orders {
                let mut entries: Vec<(&String, &f64)> = o.log_probs.iter().collect();
                entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
                w.write_u32::<LittleEndian>(entries.len() as u32)?;
                for (g, &lp) in entries {
                    write_str(&mut w, g)?;
                    w.write_f64::<LittleEndian>(lp)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<LangModel, LangIdError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(LangIdError::Format("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(LangIdError::Format(format!("unsupported version {version}")));
        }
        let alpha = r.read_f64::<LittleEndian>()?;
        let mut vocab_sizes = [0u64; MAX_ORDER];
        for v in &mut vocab_sizes {
            *v = r.read_u64::<LittleEndian>()?;
        }
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut heads = Vec::with_capacity(n);
        for _ in 0..n {
            let code = read_str(&mut r)?;
            let lang: Lang = code.parse().map_err(|e| LangIdError::Format(format!("{e}")))?;
            let log_prior = r.read_f64::<LittleEndian>()?;
            let mut orders = Vec::with_capacity(MAX_ORDER);
            for _ in 0..MAX_ORDER {
                let total = r.read_u64::<LittleEndian>()?;
                let log_unseen = r.read_f64::<LittleEndian>()?;
                orders.push((total, log_unseen));
            }
            heads.push((lang, log_prior, orders));
        }
        let mut languages = Vec::with_capacity(n);
        for (lang, log_prior, orders) in heads {
            let mut tables = Vec::with_capacity(MAX_ORDER);
            for (total, log_unseen) in orders {
                let count = r.read_u32::<LittleEndian>()? as usize;
                let mut log_probs = HashMap::with_capacity(count);
                for _ in 0..count {
                    let g = read_str(&mut r)?;
                    log_probs.insert(g, r.read_f64::<LittleEndian>()?);
                }
                tables.push(OrderTable {
                    total,
                    log_probs,
                    log_unseen,
                });
            }
            let orders: [OrderTable; MAX_ORDER] = tables
                .try_into()
                .map_err(|_| LangIdError::Format("order count".into()))?;
            languages.push(LanguageTable {
                lang,
                log_prior,
                orders,
            });
        }
        Ok(LangModel {
            version,
            alpha,
            vocab_sizes,
            languages,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), LangIdError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<LangModel, LangIdError> {
        let bytes = std::fs::read(path)?;
        LangModel::read_from(&bytes[..])
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u16::<LittleEndian>(s.len() as u16)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, LangIdError> {
    let len = r.read_u16::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| LangIdError::Format(e.to_string()))
}
