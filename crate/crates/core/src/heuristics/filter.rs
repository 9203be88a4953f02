use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, DUP_NGRAM_ORDERS, TOP_NGRAM_ORDERS};
use super::HeuristicsError;
use crate::corpus::Document;
use crate::lang::Lang;

/// Features that indicate noise; each gets an upper cutoff when calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseFeature {
    Perplexity,
    DuplicateLines,
    CharsInDuplicateLines,
    TopNgram(u8),
    DupNgram(u8),
    LinesEllipsis,
    LinesBullet,
}

impl NoiseFeature {
    /// Every calibrated feature, in the order the full filter checks them.
    pub fn all() -> Vec<NoiseFeature> {
        let mut v = vec![
            NoiseFeature::Perplexity,
            NoiseFeature::DuplicateLines,
            NoiseFeature::CharsInDuplicateLines,
        ];
        v.extend(TOP_NGRAM_ORDERS.iter().map(|&n| NoiseFeature::TopNgram(n as u8)));
        v.extend(DUP_NGRAM_ORDERS.iter().map(|&n| NoiseFeature::DupNgram(n as u8)));
        v.push(NoiseFeature::LinesEllipsis);
        v.push(NoiseFeature::LinesBullet);
        v
    }

    pub fn name(self) -> String {
        match self {
            NoiseFeature::Perplexity => "ppl_score".into(),
            NoiseFeature::DuplicateLines => "frac_duplicate_lines".into(),
            NoiseFeature::CharsInDuplicateLines => "frac_chars_in_duplicate_lines".into(),
            NoiseFeature::TopNgram(n) => format!("frac_chars_top_{n}gram"),
            NoiseFeature::DupNgram(n) => format!("frac_chars_dup_{n}gram"),
            NoiseFeature::LinesEllipsis => "frac_lines_ellipsis".into(),
            NoiseFeature::LinesBullet => "frac_lines_bullet".into(),
        }
    }

    pub fn from_name(name: &str) -> Option<NoiseFeature> {
        NoiseFeature::all().into_iter().find(|f| f.name() == name)
    }

    pub fn value(self, fv: &FeatureVector) -> f64 {
        match self {
            NoiseFeature::Perplexity => fv.ppl_score,
            NoiseFeature::DuplicateLines => fv.frac_duplicate_lines,
            NoiseFeature::CharsInDuplicateLines => fv.frac_chars_in_duplicate_lines,
            NoiseFeature::TopNgram(n) => fv.top_ngram(n as usize).unwrap_or(0.0),
            NoiseFeature::DupNgram(n) => fv.dup_ngram(n as usize).unwrap_or(0.0),
            NoiseFeature::LinesEllipsis => fv.frac_lines_ellipsis,
            NoiseFeature::LinesBullet => fv.frac_lines_bullet,
        }
    }
}

impl fmt::Display for NoiseFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Upper bounds keyed by feature name.
pub type PercentileCutoffs = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangThresholds {
    /// Inclusive word-count range.
    pub token_count: [u64; 2],
    /// Inclusive range of characters per word.
    pub mean_word_length: [f64; 2],
    pub symbol_to_word_max: f64,
    /// Strict lower bound on words per sentence.
    pub mean_sentence_min: f64,
    /// Overrides the config-wide language-confidence minimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang_confidence_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentile_cutoffs: Option<PercentileCutoffs>,
}

impl LangThresholds {
    fn row(tc: [u64; 2], mwl: [f64; 2], s2w: f64, msl: f64) -> LangThresholds {
        LangThresholds {
            token_count: tc,
            mean_word_length: mwl,
            symbol_to_word_max: s2w,
            mean_sentence_min: msl,
            lang_confidence_min: None,
            percentile_cutoffs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub lang_confidence_min: f64,
    pub languages: BTreeMap<Lang, LangThresholds>,
}

/// Row order of the published threshold table.
pub const TABLE_ORDER: [Lang; 11] = [
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

impl Default for FilterConfig {
    fn default() -> Self {
        let r = LangThresholds::row;
        let languages = BTreeMap::from([
            (Lang::Hi, r([50, 10000], [3.0, 10.0], 0.22, 4.2)),
            (Lang::Bn, r([40, 10000], [4.0, 9.0], 0.24, 4.4)),
            (Lang::Ta, r([45, 10000], [6.0, 9.0], 0.32, 5.1)),
            (Lang::Ml, r([55, 10000], [6.0, 10.0], 0.25, 3.5)),
            (Lang::Mr, r([43, 10000], [4.0, 6.0], 0.31, 4.3)),
            (Lang::Te, r([52, 10000], [5.0, 8.0], 0.28, 5.4)),
            (Lang::Kn, r([48, 10000], [5.0, 8.0], 0.32, 3.6)),
            (Lang::Gu, r([51, 10000], [4.0, 6.0], 0.23, 3.4)),
            (Lang::Pa, r([55, 10000], [3.0, 6.0], 0.24, 3.7)),
            (Lang::Or, r([47, 10000], [4.0, 7.0], 0.32, 4.2)),
            (Lang::As, r([49, 10000], [4.0, 7.0], 0.25, 3.8)),
        ]);
        FilterConfig {
            lang_confidence_min: 0.6,
            languages,
        }
    }
}

impl FilterConfig {
    pub fn from_toml(s: &str) -> Result<FilterConfig, HeuristicsError> {
        let cfg: FilterConfig = toml::from_str(s).map_err(|e| HeuristicsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("filter config serializes")
    }

    pub fn validate(&self) -> Result<(), HeuristicsError> {
        let bad = |l: Lang, what: &str| Err(HeuristicsError::Config(format!("{l}: {what}")));
        for (&l, t) in &self.languages {
            if t.token_count[0] > t.token_count[1] {
                return bad(l, "token_count lo > hi");
            }
            if !(t.mean_word_length[0] <= t.mean_word_length[1]) {
                return bad(l, "mean_word_length lo > hi");
            }
            if let Some(c) = &t.percentile_cutoffs {
                if let Some(k) = c.keys().find(|k| NoiseFeature::from_name(k).is_none()) {
                    return bad(l, &format!("unknown feature `{k}` in percentile_cutoffs"));
                }
            }
        }
        Ok(())
    }

    pub fn with_lang_confidence_min(mut self, min: f64) -> FilterConfig {
        self.lang_confidence_min = min;
        self
    }

    pub fn thresholds(&self, lang: Lang) -> Result<&LangThresholds, HeuristicsError> {
        self.languages.get(&lang).ok_or(HeuristicsError::UnknownLanguage(lang))
    }

    pub fn set_cutoffs(&mut self, lang: Lang, cutoffs: PercentileCutoffs) -> Result<(), HeuristicsError> {
        self.languages
            .get_mut(&lang)
            .ok_or(HeuristicsError::UnknownLanguage(lang))?
            .percentile_cutoffs = Some(cutoffs);
        Ok(())
    }

    /// One row per configured language, published order first, formatted
    /// `Lang & [lo,hi] & [lo,hi] & max & >min`.
    pub fn table_rows(&self) -> Vec<String> {
        let mut order: Vec<Lang> = TABLE_ORDER.iter().copied().filter(|l| self.languages.contains_key(l)).collect();
        order.extend(self.languages.keys().copied().filter(|l| !TABLE_ORDER.contains(l)));
        order
            .into_iter()
            .map(|l| {
                let t = &self.languages[&l];
                let code = l.code();
                let name = code[..1].to_uppercase() + &code[1..];
                format!(
                    "{name} & [{},{}] & [{},{}] & {} & >{}",
                    t.token_count[0],
                    t.token_count[1],
                    t.mean_word_length[0],
                    t.mean_word_length[1],
                    t.symbol_to_word_max,
                    t.mean_sentence_min
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropReason {
    LangConfidence,
    TokenCount,
    MeanWordLength,
    SymbolToWord,
    MeanSentenceLength,
    Noise(NoiseFeature),
}

impl DropReason {
    pub fn name(self) -> String {
        match self {
            DropReason::LangConfidence => "lang_confidence".into(),
            DropReason::TokenCount => "token_count".into(),
            DropReason::MeanWordLength => "mean_word_length".into(),
            DropReason::SymbolToWord => "symbol_to_word".into(),
            DropReason::MeanSentenceLength => "mean_sentence_length".into(),
            DropReason::Noise(f) => f.name(),
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Drop(DropReason),
}

impl Verdict {
    pub fn is_keep(self) -> bool {
        self == Verdict::Keep
    }
}

/// Language gate plus the four basic predicates, checked in that order.
/// Undetermined documents fail the language gate without a config lookup.
pub fn apply_basic_filter(doc: &Document, fv: &FeatureVector, cfg: &FilterConfig) -> Result<Verdict, HeuristicsError> {
    if doc.lang == Lang::Und {
        return Ok(Verdict::Drop(DropReason::LangConfidence));
    }
    let t = cfg.thresholds(doc.lang)?;
    let min_conf = t.lang_confidence_min.unwrap_or(cfg.lang_confidence_min);
    let verdict = if !(doc.lang_confidence >= min_conf) {
        Verdict::Drop(DropReason::LangConfidence)
    } else if fv.token_count < t.token_count[0] || fv.token_count > t.token_count[1] {
        Verdict::Drop(DropReason::TokenCount)
    } else if fv.mean_word_length < t.mean_word_length[0] || fv.mean_word_length > t.mean_word_length[1] {
        Verdict::Drop(DropReason::MeanWordLength)
    } else if fv.symbol_to_word_ratio > t.symbol_to_word_max {
        Verdict::Drop(DropReason::SymbolToWord)
    } else if !(fv.mean_sentence_length > t.mean_sentence_min) {
        Verdict::Drop(DropReason::MeanSentenceLength)
    } else {
        Verdict::Keep
    };
    Ok(verdict)
}

/// Basic filter, then every calibrated feature against its upper cutoff.
pub fn apply_full_filter(doc: &Document, fv: &FeatureVector, cfg: &FilterConfig) -> Result<Verdict, HeuristicsError> {
    let basic = apply_basic_filter(doc, fv, cfg)?;
    if basic != Verdict::Keep {
        return Ok(basic);
    }
    let cutoffs = cfg
        .thresholds(doc.lang)?
        .percentile_cutoffs
        .as_ref()
        .ok_or(HeuristicsError::MissingCutoffs(doc.lang))?;
    for f in NoiseFeature::all() {
        if let Some(&cut) = cutoffs.get(&f.name()) {
            if f.value(fv) > cut {
                return Ok(Verdict::Drop(DropReason::Noise(f)));
            }
        }
    }
    Ok(Verdict::Keep)
}
