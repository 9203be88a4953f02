use rayon::prelude::*;
use serde::Serialize;

use super::lsh::{LshIndex, LshParams};
use super::minhash::{MinHashSignature, MinHasher};
use super::shingle::{shingle, ShingleSet};
use super::DedupError;
use crate::corpus::{DocId, Document};

pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_BATCH_CAPACITY: usize = 10_000_000;
pub const DEFAULT_DEDUP_SEED: u64 = 0x6465_6475_70;

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct DedupParams {
    pub threshold: f64,
    pub bands: usize,
    pub rows: usize,
    pub seed: u64,
    pub batch_capacity: usize,
    /// Threshold exact Jaccard instead of the signature estimate.
    pub verify_exact: bool,
}

impl Default for DedupParams {
    fn default() -> Self {
        DedupParams {
            threshold: DEFAULT_THRESHOLD,
            bands: 25,
            rows: 10,
            seed: DEFAULT_DEDUP_SEED,
            batch_capacity: DEFAULT_BATCH_CAPACITY,
            verify_exact: false,
        }
    }
}

impl DedupParams {
    pub fn lsh(&self) -> LshParams {
        LshParams {
            bands: self.bands,
            rows: self.rows,
        }
    }

    pub fn validate(&self) -> Result<(), DedupError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(DedupError::InvalidParams(format!("threshold {} outside [0,1]", self.threshold)));
        }
        if self.bands == 0 || self.rows == 0 {
            return Err(DedupError::InvalidParams("bands and rows must be positive".into()));
        }
        if self.batch_capacity == 0 {
            return Err(DedupError::InvalidParams("batch capacity must be positive".into()));
        }
        Ok(())
    }
}

/// Documents ordered by fetch time, at most `capacity` of them.
#[derive(Debug, Clone)]
pub struct DedupBatch {
    pub docs: Vec<Document>,
    pub capacity: usize,
}

/// Indices of `fetched_at` values in stable time order, chunked by
/// `capacity`.
pub fn plan_batch_indices(fetched_at: &[i64], capacity: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..fetched_at.len()).collect();
    order.sort_by_key(|&i| fetched_at[i]);
    order.chunks(capacity.max(1)).map(<[usize]>::to_vec).collect()
}

/// Stable sort by `fetched_at`, then consecutive chunks of `capacity`.
pub fn batch_planner(docs: Vec<Document>, capacity: usize) -> Vec<DedupBatch> {
    let capacity = capacity.max(1);
    let times: Vec<i64> = docs.iter().map(|d| d.fetched_at).collect();
    let mut slots: Vec<Option<Document>> = docs.into_iter().map(Some).collect();
    plan_batch_indices(&times, capacity)
        .into_iter()
        .map(|idx| DedupBatch {
            docs: idx.into_iter().map(|i| slots[i].take().expect("each index once")).collect(),
            capacity,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub survivor: DocId,
    pub duplicates: Vec<DocId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DedupReport {
    pub docs_in: usize,
    pub docs_out: usize,
    /// Documents with no words to shingle; kept without comparison.
    pub unshingled: usize,
    pub candidate_pairs: usize,
    pub merged_pairs: usize,
    pub clusters: usize,
    /// Candidates where the estimate and exact Jaccard disagree about the
    /// threshold; only counted with `verify_exact`.
    pub exact_disagreements: usize,
}

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    /// Indices into the input batch, ascending.
    pub survivors: Vec<usize>,
    pub clusters: Vec<Cluster>,
    pub report: DedupReport,
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Near-duplicate clustering within one batch. Within a cluster the survivor
/// is the document with the smallest `(fetched_at, url, id)`.
pub fn dedup_batch(docs: &[Document], params: &DedupParams) -> Result<DedupOutcome, DedupError> {
    params.validate()?;
    let hasher = MinHasher::new(params.lsh().dimension(), params.seed);
    let sets: Vec<Option<ShingleSet>> = docs.par_iter().map(|d| shingle(d).ok()).collect();
    let shingled: Vec<usize> = (0..docs.len()).filter(|&i| sets[i].is_some()).collect();
    let sigs: Vec<MinHashSignature> = shingled
        .par_iter()
        .map(|&i| hasher.signature(sets[i].as_ref().expect("shingled")))
        .collect();

    let candidates = LshIndex::build(&sigs, params.lsh())?.candidates();
    let mut uf = UnionFind::new(docs.len());
    let mut merged = 0;
    let mut disagreements = 0;
    for &(a, b) in &candidates {
        let estimate = sigs[a as usize].similarity(&sigs[b as usize]) >= params.threshold;
        let (da, db) = (shingled[a as usize], shingled[b as usize]);
        let hit = if params.verify_exact {
            let exact = sets[da].as_ref().unwrap().jaccard(sets[db].as_ref().unwrap()) >= params.threshold;
            if exact != estimate {
                disagreements += 1;
            }
            exact
        } else {
            estimate
        };
        if hit {
            merged += 1;
            uf.union(da as u32, db as u32);
        }
    }

    let mut members: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for i in 0..docs.len() {
        members.entry(uf.find(i as u32)).or_default().push(i);
    }
    let key = |i: &usize| (docs[*i].fetched_at, docs[*i].url.as_str(), docs[*i].id);
    let mut survivors = Vec::with_capacity(members.len());
    let mut clusters = Vec::new();
    for group in members.values() {
        let s = *group.iter().min_by_key(|i| key(i)).expect("non-empty group");
        survivors.push(s);
        if group.len() > 1 {
            clusters.push((s, group.iter().filter(|&&i| i != s).map(|&i| docs[i].id).collect()));
        }
    }
    survivors.sort_unstable();
    clusters.sort_by_key(|c: &(usize, Vec<DocId>)| c.0);
    let clusters: Vec<Cluster> = clusters
        .into_iter()
        .map(|(s, duplicates)| Cluster {
            survivor: docs[s].id,
            duplicates,
        })
        .collect();

    let report = DedupReport {
        docs_in: docs.len(),
        docs_out: survivors.len(),
        unshingled: docs.len() - shingled.len(),
        candidate_pairs: candidates.len(),
        merged_pairs: merged,
        clusters: clusters.len(),
        exact_disagreements: disagreements,
    };
    Ok(DedupOutcome {
        survivors,
        clusters,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

    fn doc(url: &str, t: i64, text: &str) -> Document {
        Document::new(url, t, text, Source::Web)
    }

    fn long_text(seed: usize, n: usize) -> String {
        (0..n).map(|i| format!("w{}", (i * 7919 + seed * 104_729) % 100_003)).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn no_duplicates_keeps_all() {
        let docs: Vec<Document> = (0..20).map(|i| doc("u", i, &long_text(i as usize, 50))).collect();
        let out = dedup_batch(&docs, &DedupParams::default()).unwrap();
        assert_eq!(out.survivors, (0..20).collect::<Vec<_>>());
        assert!(out.clusters.is_empty());
    }

    #[test]
    fn near_duplicates_collapse_to_earliest() {
        let base = long_text(1, 300);
        let mut v1: Vec<&str> = base.split(' ').collect();
        v1[150] = "edited";
        let v1 = v1.join(" ");
        let docs = vec![
            doc("https://b", 5, &base),
            doc("https://a", 3, &v1),
            doc("https://c", 3, &format!("{base} tail")),
            doc("https://z", 1, &long_text(9, 300)),
        ];
        let out = dedup_batch(&docs, &DedupParams::default()).unwrap();
        assert_eq!(out.survivors, vec![1, 3]);
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.clusters[0].survivor, docs[1].id);
        assert_eq!(out.clusters[0].duplicates, vec![docs[0].id, docs[2].id]);
        assert_eq!(out.report.docs_out, 2);
    }

    #[test]
    fn empty_documents_survive_unshingled() {
        let docs = vec![doc("a", 0, "!!!"), doc("b", 0, "!!!")];
        let out = dedup_batch(&docs, &DedupParams::default()).unwrap();
        assert_eq!(out.survivors, vec![0, 1]);
        assert_eq!(out.report.unshingled, 2);
    }

    #[test]
    fn planner_sorts_and_chunks() {
        let docs: Vec<Document> = [5, 1, 3, 1, 2].iter().enumerate().map(|(i, &t)| doc(&i.to_string(), t, "x")).collect();
        let b = batch_planner(docs, 2);
        let times: Vec<Vec<i64>> = b.iter().map(|b| b.docs.iter().map(|d| d.fetched_at).collect()).collect();
        assert_eq!(times, vec![vec![1, 1], vec![2, 3], vec![5]]);
        assert_eq!(b[0].docs[0].url, "1");
    }
}
