//! Character-bigram language model used for the perplexity feature.

use std::collections::{BTreeMap, HashMap};

use crate::lang::Lang;

/// Start-of-text context symbol.
const START: char = '\u{0002}';
pub const PPL_SMOOTHING: f64 = 0.01;

/// Add-α smoothed character-bigram model. Whitespace runs are folded into a
/// single space before counting and scoring.
#[derive(Debug, Clone, Default)]
pub struct CharBigramModel {
    bigrams: HashMap<(char, char), u64>,
    contexts: HashMap<char, u64>,
    /// Distinct characters seen, plus one unseen bucket.
    vocab: u64,
}

fn symbols(text: &str) -> impl Iterator<Item = char> + '_ {
    let mut words = text.split_whitespace();
    let first = words.next();
    std::iter::once(START)
        .chain(first.into_iter().flat_map(str::chars))
        .chain(words.flat_map(|w| std::iter::once(' ').chain(w.chars())))
}

impl CharBigramModel {
    pub fn train<'a>(texts: impl IntoIterator<Item = &'a str>) -> CharBigramModel {
        let mut m = CharBigramModel::default();
        let mut chars = std::collections::HashSet::new();
        for t in texts {
            let seq: Vec<char> = symbols(t).collect();
            for w in seq.windows(2) {
                *m.bigrams.entry((w[0], w[1])).or_default() += 1;
                *m.contexts.entry(w[0]).or_default() += 1;
                chars.insert(w[1]);
            }
        }
        m.vocab = chars.len() as u64 + 1;
        m
    }

    pub fn log_prob(&self, prev: char, next: char) -> f64 {
        let c = self.bigrams.get(&(prev, next)).copied().unwrap_or(0) as f64;
        let ctx = self.contexts.get(&prev).copied().unwrap_or(0) as f64;
        ((c + PPL_SMOOTHING) / (ctx + PPL_SMOOTHING * self.vocab as f64)).ln()
    }

    /// exp of the mean negative log-probability per character; 0 for text
    /// without characters.
    pub fn perplexity(&self, text: &str) -> f64 {
        let seq: Vec<char> = symbols(text).collect();
        if seq.len() < 2 {
            return 0.0;
        }
        let nll: f64 = seq.windows(2).map(|w| -self.log_prob(w[0], w[1])).sum();
        (nll / (seq.len() - 1) as f64).exp()
    }
}

/// One bigram model per language.
pub type PerplexityModels = BTreeMap<Lang, CharBigramModel>;

/// Trains a model per language from labelled clean text.
pub fn train_perplexity_models<'a, I>(labeled: I) -> PerplexityModels
where
    I: IntoIterator<Item = (Lang, &'a str)>,
{
    let mut grouped: BTreeMap<Lang, Vec<&str>> = BTreeMap::new();
    for (l, t) in labeled {
        grouped.entry(l).or_default().push(t);
    }
    grouped
        .into_iter()
        .map(|(l, ts)| (l, CharBigramModel::train(ts)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_distribution_sums_to_one() {
        let m = CharBigramModel::train(["abcab", "bca"]);
        let seen = ['a', 'b', 'c'];
        for prev in ['a', 'b', START] {
            let p: f64 = seen.iter().map(|&c| m.log_prob(prev, c).exp()).sum::<f64>()
                + m.log_prob(prev, 'z').exp();
            assert!((p - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn in_domain_text_has_lower_perplexity() {
        let m = CharBigramModel::train(["the cat sat on the mat", "the hat is on the cat"]);
        assert!(m.perplexity("the cat is on the mat") < m.perplexity("xqz vvk jjw"));
        assert_eq!(m.perplexity(""), 0.0);
    }
}
