use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::alphabet::{alphabet_from_counts, is_structural};
use super::model::{Merge, Piece, TokenizerModel, BYTE_TOKENS, MARKER_ID, SPECIAL_TOKENS};
use super::TokenizerError;

pub const DEFAULT_COVERAGE: f64 = 0.997;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub vocab_size: usize,
    pub character_coverage: f64,
    /// Lines kept by hash-ordered sampling; `None` uses the whole corpus.
    pub corpus_sample_size: Option<usize>,
    pub byte_fallback: bool,
    pub split_digits: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            vocab_size: 100_000,
            character_coverage: DEFAULT_COVERAGE,
            corpus_sample_size: None,
            byte_fallback: true,
            split_digits: true,
            seed: 0,
        }
    }
}

/// The `n` lines with the smallest seeded hash, in corpus order.
pub fn sample_corpus<S: AsRef<str>>(corpus: &[S], n: usize, seed: u64) -> Vec<&str> {
    if n >= corpus.len() {
        return corpus.iter().map(AsRef::as_ref).collect();
    }
    let mut keyed: Vec<(u64, usize)> = corpus
        .iter()
        .enumerate()
        .map(|(i, t)| (xxh3_64_with_seed(t.as_ref().as_bytes(), seed), i))
        .collect();
    keyed.sort_unstable();
    let mut chosen: Vec<usize> = keyed[..n].iter().map(|&(_, i)| i).collect();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| corpus[i].as_ref()).collect()
}

pub fn word_counts<S: AsRef<str> + Sync>(corpus: &[S]) -> HashMap<String, u64> {
    corpus
        .par_iter()
        .fold(HashMap::new, |mut m: HashMap<String, u64>, t| {
            for w in t.as_ref().split_whitespace() {
                *m.entry(w.to_string()).or_default() += 1;
            }
            m
        })
        .reduce(HashMap::new, |mut a, b| {
            for (w, n) in b {
                *a.entry(w).or_default() += n;
            }
            a
        })
}

#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    stamp: u32,
    left: String,
    right: String,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.count
            .cmp(&o.count)
            .then(o.stamp.cmp(&self.stamp))
            .then_with(|| (&o.left, &o.right).cmp(&(&self.left, &self.right)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct PairStat {
    count: u64,
    stamp: u32,
}

fn apply_merge(run: &mut Vec<u32>, pair: (u32, u32), result: u32) {
    let mut i = 0;
    let mut w = 0;
    while i < run.len() {
        if i + 1 < run.len() && (run[i], run[i + 1]) == pair {
            run[w] = result;
            i += 2;
        } else {
            run[w] = run[i];
            i += 1;
        }
        w += 1;
    }
    run.truncate(w);
}

/// Greedy BPE. Pairs are ranked by weighted count, then by the merge step at
/// which the pair first appeared, then by the (left, right) strings.
pub fn train_bpe<S: AsRef<str> + Sync>(corpus: &[S], cfg: &TrainConfig) -> Result<TokenizerModel, TokenizerError> {
    let sampled;
    let words = match cfg.corpus_sample_size {
        Some(n) => {
            sampled = sample_corpus(corpus, n, cfg.seed);
            word_counts(&sampled)
        }
        None => word_counts(corpus),
    };
    let mut words: Vec<(String, u64)> = words.into_iter().collect();
    words.sort_unstable();

    let mut chars: HashMap<char, u64> = HashMap::new();
    for (w, n) in &words {
        for c in w.chars().filter(|&c| !is_structural(c)) {
            *chars.entry(c).or_default() += n;
        }
    }
    let alphabet = alphabet_from_counts(&chars, cfg.character_coverage)?;
    let base = SPECIAL_TOKENS.len() + if cfg.byte_fallback { BYTE_TOKENS } else { 0 } + alphabet.len();
    if cfg.vocab_size < base {
        return Err(TokenizerError::VocabTooSmall {
            requested: cfg.vocab_size,
            required: base,
        });
    }
    let skeleton = TokenizerModel::from_parts(alphabet.clone(), Vec::new(), cfg.byte_fallback, cfg.split_digits, cfg.character_coverage);

    // Merge runs of length >= 2 with their word weights.
    let mut runs: Vec<(Vec<u32>, u64)> = Vec::new();
    let mut pieces = Vec::new();
    for (w, n) in &words {
        pieces.clear();
        skeleton.pieces_of(w, true, &mut pieces);
        for p in pieces.drain(..) {
            if let Piece::Run(r) = p {
                if r.len() >= 2 {
                    runs.push((r, *n));
                }
            }
        }
    }
    drop(words);

    let mut strings: Vec<String> = (0..base as u32).map(|i| skeleton.token(i).unwrap_or_default().to_string()).collect();
    let mut piece_ids: HashMap<String, u32> = skeleton.pieces().map(|(id, s)| (s.to_string(), id)).collect();
    piece_ids.insert(strings[MARKER_ID as usize].clone(), MARKER_ID);

    let mut stats: HashMap<(u32, u32), PairStat> = HashMap::new();
    let mut where_: HashMap<(u32, u32), HashSet<u32>> = HashMap::new();
    for (ri, (r, n)) in runs.iter().enumerate() {
        for p in r.windows(2) {
            let k = (p[0], p[1]);
            stats.entry(k).or_insert(PairStat { count: 0, stamp: 0 }).count += n;
            where_.entry(k).or_default().insert(ri as u32);
        }
    }
    let mut heap: BinaryHeap<Candidate> = stats
        .iter()
        .map(|(&pair, s)| Candidate {
            count: s.count,
            stamp: s.stamp,
            left: strings[pair.0 as usize].clone(),
            right: strings[pair.1 as usize].clone(),
            pair,
        })
        .collect();

    let mut merges: Vec<(Merge, String, u64)> = Vec::new();
    let mut vocab = base;
    let mut step: u32 = 0;
    while vocab < cfg.vocab_size {
        let Some(top) = heap.pop() else { break };
        let current = stats.get(&top.pair).map_or(0, |s| s.count);
        if current != top.count {
            continue;
        }
        if top.count < 2 {
            break;
        }
        step += 1;
        let merged = format!("{}{}", top.left, top.right);
        let result = match piece_ids.get(&merged) {
            Some(&id) => id,
            None => {
                let id = strings.len() as u32;
                strings.push(merged.clone());
                piece_ids.insert(merged.clone(), id);
                vocab += 1;
                id
            }
        };
        merges.push((
            Merge {
                left: top.pair.0,
                right: top.pair.1,
                result,
            },
            merged,
            top.count,
        ));

        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        let mut affected: Vec<u32> = where_.remove(&top.pair).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        for ri in affected {
            let (run, n) = &mut runs[ri as usize];
            let n = *n;
            for p in run.windows(2) {
                let k = (p[0], p[1]);
                if let Some(s) = stats.get_mut(&k) {
                    s.count -= n;
                }
                touched.insert(k);
            }
            apply_merge(run, top.pair, result);
            for p in run.windows(2) {
                let k = (p[0], p[1]);
                stats.entry(k).or_insert(PairStat { count: 0, stamp: step }).count += n;
                where_.entry(k).or_default().insert(ri);
                touched.insert(k);
            }
        }
        stats.remove(&top.pair);
        for k in touched {
            if let Some(s) = stats.get(&k) {
                if s.count > 0 && k != top.pair {
                    heap.push(Candidate {
                        count: s.count,
                        stamp: s.stamp,
                        left: strings[k.0 as usize].clone(),
                        right: strings[k.1 as usize].clone(),
                        pair: k,
                    });
                }
            }
        }
    }

    Ok(TokenizerModel::from_parts(alphabet, merges, cfg.byte_fallback, cfg.split_digits, cfg.character_coverage))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(vocab: usize) -> TrainConfig {
        TrainConfig {
            vocab_size: vocab,
            character_coverage: 1.0,
            byte_fallback: false,
            ..Default::default()
        }
    }

    #[test]
    fn single_merge() {
        // alphabet {a}; specials 5 + 1 char = 6; room for one merge.
        // (▁,a) and (a,a) tie at 3; "a" sorts before U+2581.
        let m = train_bpe(&["aa aa aa"], &cfg(7)).unwrap();
        assert_eq!(m.merge_table(), vec![("a".to_string(), "a".to_string())]);
        assert_eq!(m.encode("aa"), vec![MARKER_ID, 6]);
        assert_eq!(m.vocab_size(), 7);
        let m = train_bpe(&["aa aa aa"], &cfg(8)).unwrap();
        assert_eq!(m.merge_table()[1], ("\u{2581}".to_string(), "aa".to_string()));
        assert_eq!(m.encode("aa").len(), 1);
    }

    #[test]
    fn single_character_corpus_has_no_merges() {
        let m = train_bpe(&["a"], &cfg(100)).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(m.vocab_size(), 6);
    }

    #[test]
    fn lexicographic_tie_break() {
        // "▁b"..: pairs (▁,a) ×2 and (▁,b) ×2 tie on count and stamp.
        let m = train_bpe(&["b a b a"], &cfg(8)).unwrap();
        assert_eq!(m.merge_table(), vec![("\u{2581}".into(), "a".into())]);
    }

    #[test]
    fn vocab_too_small() {
        assert!(matches!(
            train_bpe(&["abc"], &cfg(5)),
            Err(TokenizerError::VocabTooSmall { requested: 5, required: 8 })
        ));
    }

    #[test]
    fn digits_never_merge() {
        let m = train_bpe(&["12 12 12 12"], &cfg(50)).unwrap();
        assert!(m.merge_table().iter().all(|(l, r)| !(l.contains('1') || r.contains('1'))));
    }

    #[test]
    fn sampling_is_deterministic_subset() {
        let corpus: Vec<String> = (0..50).map(|i| format!("line {i}")).collect();
        let a = sample_corpus(&corpus, 10, 3);
        assert_eq!(a, sample_corpus(&corpus, 10, 3));
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| {
            let idx = |s: &str| corpus.iter().position(|c| c == s).unwrap();
            idx(w[0]) < idx(w[1])
        }));
    }
}
