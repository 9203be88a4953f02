use std::collections::HashMap;

use super::{TokenizerError, MARKER};

/// Characters never admitted to the alphabet.
pub fn is_structural(c: char) -> bool {
    c.is_whitespace() || c == MARKER
}

pub fn char_counts<'a, I, S>(corpus: I) -> HashMap<char, u64>
where
    I: IntoIterator<Item = &'a S>,
    S: AsRef<str> + 'a + ?Sized,
{
    let mut counts = HashMap::new();
    for t in corpus {
        for c in t.as_ref().chars().filter(|&c| !is_structural(c)) {
            *counts.entry(c).or_insert(0u64) += 1;
        }
    }
    counts
}

/// Shortest frequency-ordered prefix whose cumulative share reaches
/// `coverage`. Ties on frequency are ordered by code point.
pub fn alphabet_from_counts(counts: &HashMap<char, u64>, coverage: f64) -> Result<Vec<(char, u64)>, TokenizerError> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(TokenizerError::Config(format!("character coverage {coverage} outside (0,1]")));
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(TokenizerError::EmptyCorpus);
    }
    let mut sorted: Vec<(char, u64)> = counts.iter().map(|(&c, &n)| (c, n)).collect();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cum = 0u64;
    let mut keep = sorted.len();
    for (i, &(_, n)) in sorted.iter().enumerate() {
        cum += n;
        if cum as f64 / total as f64 >= coverage {
            keep = i + 1;
            break;
        }
    }
    sorted.truncate(keep);
    Ok(sorted)
}

pub fn build_alphabet<'a, I, S>(corpus: I, coverage: f64) -> Result<Vec<char>, TokenizerError>
where
    I: IntoIterator<Item = &'a S>,
    S: AsRef<str> + 'a + ?Sized,
{
    Ok(alphabet_from_counts(&char_counts(corpus), coverage)?
        .into_iter()
        .map(|(c, _)| c)
        .collect())
}
