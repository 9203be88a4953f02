use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::shingle::ShingleSet;
use crate::corpus::DocId;

/// Mersenne prime 2^61 − 1, the modulus of the hash family.
pub const MERSENNE_61: u64 = (1 << 61) - 1;
pub const DEFAULT_PERMUTATIONS: usize = 250;

#[inline]
fn mod_mersenne(x: u128) -> u64 {
    let lo = (x as u64) & MERSENNE_61;
    let hi = (x >> 61) as u64;
    let mut r = lo + (hi & MERSENNE_61) + (hi >> 61);
    while r >= MERSENNE_61 {
        r -= MERSENNE_61;
    }
    r
}

/// The `(a·x + b) mod p` family drawn from a seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHasher {
    seed: u64,
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(permutations: usize, seed: u64) -> MinHasher {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..permutations)
            .map(|_| (rng.gen_range(1..MERSENNE_61), rng.gen_range(0..MERSENNE_61)))
            .collect();
        MinHasher { seed, coeffs }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn permutations(&self) -> usize {
        self.coeffs.len()
    }

    pub fn signature(&self, set: &ShingleSet) -> MinHashSignature {
        let mut values = vec![u64::MAX; self.coeffs.len()];
        for &s in &set.shingles {
            let x = mod_mersenne(s as u128) as u128;
            for (v, &(a, b)) in values.iter_mut().zip(&self.coeffs) {
                let h = mod_mersenne(a as u128 * x + b as u128);
                if h < *v {
                    *v = h;
                }
            }
        }
        MinHashSignature {
            doc_id: set.doc_id,
            seed: self.seed,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub doc_id: DocId,
    pub seed: u64,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    /// Fraction of agreeing positions. Panics on a dimension mismatch.
    pub fn similarity(&self, other: &MinHashSignature) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "signature dimensions differ");
        let agree = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        agree as f64 / self.values.len() as f64
    }
}

pub fn minhash(set: &ShingleSet, seed: u64) -> MinHashSignature {
    MinHasher::new(DEFAULT_PERMUTATIONS, seed).signature(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: impl IntoIterator<Item = u64>) -> ShingleSet {
        let mut shingles: Vec<u64> = v.into_iter().collect();
        shingles.sort_unstable();
        shingles.dedup();
        ShingleSet { doc_id: DocId(0), shingles }
    }

    #[test]
    fn reduction_matches_modulo() {
        for x in [0u128, 1, MERSENNE_61 as u128, u64::MAX as u128, (u64::MAX as u128) * 12345 + 7] {
            assert_eq!(mod_mersenne(x) as u128, x % MERSENNE_61 as u128);
        }
    }

    #[test]
    fn equal_sets_agree() {
        let a = set(0..100);
        let s1 = minhash(&a, 7);
        assert_eq!(s1.values.len(), 250);
        assert_eq!(s1, minhash(&a, 7));
        assert_eq!(s1.similarity(&minhash(&a, 7)), 1.0);
        assert_ne!(s1.values, minhash(&a, 8).values);
    }

    #[test]
    fn disjoint_sets_rarely_agree() {
        let a = set((0..1000).map(|i| i * 2));
        let b = set((0..1000).map(|i| i * 2 + 1));
        assert!(minhash(&a, 1).similarity(&minhash(&b, 1)) <= 0.05);
    }
}
