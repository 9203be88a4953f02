use std::collections::HashMap;

use rayon::prelude::*;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::minhash::MinHashSignature;
use super::DedupError;

pub const DEFAULT_BANDS: usize = 25;
pub const DEFAULT_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LshParams {
    pub bands: usize,
    pub rows: usize,
}

impl Default for LshParams {
    fn default() -> Self {
        LshParams {
            bands: DEFAULT_BANDS,
            rows: DEFAULT_ROWS,
        }
    }
}

impl LshParams {
    pub fn dimension(&self) -> usize {
        self.bands * self.rows
    }

    /// Probability that a pair at similarity `s` shares at least one band.
    pub fn candidate_probability(&self, s: f64) -> f64 {
        1.0 - (1.0 - s.powi(self.rows as i32)).powi(self.bands as i32)
    }
}

/// Band tables over a fixed set of signatures. Band `b` covers rows
/// `b·rows .. (b+1)·rows`.
#[derive(Debug)]
pub struct LshIndex {
    params: LshParams,
    seed: u64,
    tables: Vec<HashMap<u64, Vec<u32>>>,
}

fn band_key(rows: &[u64], band: usize, seed: u64) -> u64 {
    let mut bytes = Vec::with_capacity(rows.len() * 8);
    for r in rows {
        bytes.extend_from_slice(&r.to_le_bytes());
    }
    xxh3_64_with_seed(&bytes, seed ^ band as u64)
}

impl LshIndex {
    pub fn build(signatures: &[MinHashSignature], params: LshParams) -> Result<LshIndex, DedupError> {
        if params.bands == 0 || params.rows == 0 {
            return Err(DedupError::InvalidParams("bands and rows must be positive".into()));
        }
        let dim = params.dimension();
        let seed = signatures.first().map_or(0, |s| s.seed);
        for s in signatures {
            if s.values.len() != dim {
                return Err(DedupError::DimensionMismatch {
                    expected: dim,
                    got: s.values.len(),
                });
            }
            if s.seed != seed {
                return Err(DedupError::SeedMismatch);
            }
        }
        let tables = (0..params.bands)
            .into_par_iter()
            .map(|b| {
                let mut t: HashMap<u64, Vec<u32>> = HashMap::new();
                for (i, s) in signatures.iter().enumerate() {
                    let rows = &s.values[b * params.rows..(b + 1) * params.rows];
                    t.entry(band_key(rows, b, seed)).or_default().push(i as u32);
                }
                t
            })
            .collect();
        Ok(LshIndex { params, seed, tables })
    }

    pub fn params(&self) -> LshParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Distinct unordered index pairs `(i, j)` with `i < j`, sorted.
    pub fn candidates(&self) -> Vec<(u32, u32)> {
        let mut pairs: Vec<(u32, u32)> = self
            .tables
            .par_iter()
            .flat_map_iter(|t| {
                let mut out = Vec::new();
                for bucket in t.values().filter(|b| b.len() > 1) {
                    for (k, &i) in bucket.iter().enumerate() {
                        for &j in &bucket[k + 1..] {
                            out.push((i, j));
                        }
                    }
                }
                out
            })
            .collect();
        pairs.par_sort_unstable();
        pairs.dedup();
        pairs
    }
}

pub fn lsh_candidates(signatures: &[MinHashSignature], params: LshParams) -> Result<Vec<(u32, u32)>, DedupError> {
    Ok(LshIndex::build(signatures, params)?.candidates())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocId;

    fn sig(seed: u64, values: Vec<u64>) -> MinHashSignature {
        MinHashSignature {
            doc_id: DocId(0),
            seed,
            values,
        }
    }

    #[test]
    fn identical_signatures_collide_once() {
        let a = sig(1, (0..250).collect());
        let c = lsh_candidates(&[a.clone(), a.clone(), sig(1, (1000..1250).collect())], LshParams::default()).unwrap();
        assert_eq!(c, vec![(0, 1)]);
    }

    #[test]
    fn one_matching_band_is_enough() {
        let a = sig(1, (0..250).collect());
        let mut vals: Vec<u64> = (1000..1250).collect();
        vals[240..250].copy_from_slice(&a.values[240..250]);
        assert_eq!(lsh_candidates(&[a, sig(1, vals)], LshParams::default()).unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn mixed_inputs_rejected() {
        let p = LshParams::default();
        assert!(matches!(
            lsh_candidates(&[sig(1, vec![0; 250]), sig(2, vec![0; 250])], p),
            Err(DedupError::SeedMismatch)
        ));
        assert!(matches!(
            lsh_candidates(&[sig(1, vec![0; 250]), sig(1, vec![0; 200])], p),
            Err(DedupError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn s_curve_midpoint() {
        let p = LshParams::default();
        // (1/b)^(1/r) ≈ 0.7248 is the usual threshold rule of thumb, but the
        // curve crosses one half at ≈ 0.698.
        assert!((p.candidate_probability(0.7246) - 0.63867).abs() < 1e-4);
        assert!((p.candidate_probability(0.698) - 0.5).abs() < 0.01);
        assert!(p.candidate_probability(0.9) > 0.9999);
        assert!(p.candidate_probability(0.4) < 0.003);
    }
}
