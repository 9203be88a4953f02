mod common;

use std::collections::HashSet;

use common::{doc, rng};
use rand::Rng;
use refinery::corpus::{DocId, Document};
use refinery::dedup::{
    batch_planner, dedup_batch, minhash, shingle, shingle_text, DedupError, DedupParams, LshIndex, LshParams,
    MinHasher,
};

fn words(seed: u64, n: usize) -> Vec<String> {
    let mut r = rng(seed);
    (0..n).map(|_| format!("v{}", r.gen_range(0..100_000))).collect()
}

fn windows(t: &str) -> HashSet<Vec<String>> {
    let w: Vec<String> = t.split_whitespace().map(str::to_string).collect();
    w.windows(5).map(<[String]>::to_vec).collect()
}

#[test]
fn three_edited_copies_and_one_unique() {
    let base = words(1, 250);
    let mut texts = vec![base.join(" ")];
    for (k, at) in [(0, 60), (1, 180)] {
        let mut w = base.clone();
        w[at] = format!("edit{k}");
        texts.push(w.join(" "));
    }
    for a in 0..3 {
        for b in a + 1..3 {
            let (x, y) = (windows(&texts[a]), windows(&texts[b]));
            let j = x.intersection(&y).count() as f64 / x.union(&y).count() as f64;
            assert!(j >= 0.9, "planted pair at {j}");
        }
    }
    texts.push(words(2, 250).join(" "));
    let docs: Vec<Document> = texts.iter().enumerate().map(|(i, t)| doc("u", 10 - i as i64, t)).collect();
    let out = dedup_batch(&docs, &DedupParams::default()).unwrap();
    // the latest-fetched copy is index 0, so the earliest (index 2) survives
    assert_eq!(out.survivors, vec![2, 3]);
    assert_eq!(out.clusters.len(), 1);
    assert_eq!(out.clusters[0].survivor, docs[2].id);
    assert_eq!(out.report.docs_out, 2);
    assert!(out.report.docs_out <= out.report.docs_in);
}

#[test]
fn verification_counts_disagreements_only_when_asked() {
    let docs: Vec<Document> = (0..30).map(|i| doc("u", i, &words(i as u64, 40).join(" "))).collect();
    let p = DedupParams {
        verify_exact: true,
        ..Default::default()
    };
    let out = dedup_batch(&docs, &p).unwrap();
    assert_eq!(out.survivors.len(), 30);
    assert_eq!(out.report.exact_disagreements, 0);
}

#[test]
fn same_batch_same_survivors() {
    let mut docs: Vec<Document> = (0..200).map(|i| doc("u", i, &words(i as u64 % 50, 60).join(" "))).collect();
    docs.reverse();
    let a = dedup_batch(&docs, &DedupParams::default()).unwrap();
    let b = dedup_batch(&docs, &DedupParams::default()).unwrap();
    assert_eq!(a.survivors, b.survivors);
    assert_eq!(a.survivors.len(), 50);
}

#[test]
fn short_documents_have_one_shingle() {
    let s = shingle_text(DocId(0), "Hello, World!").unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s, shingle_text(DocId(0), "hello world").unwrap());
    assert!(matches!(shingle(&doc("", 0, "   ")), Err(DedupError::EmptyDocument(_))));
}

#[test]
fn equal_sets_have_equal_signatures() {
    let a = shingle_text(DocId(1), &words(3, 50).join(" ")).unwrap();
    let (x, y) = (minhash(&a, 9), minhash(&a, 9));
    assert_eq!(x.values.len(), 250);
    assert_eq!(x.similarity(&y), 1.0);
    assert_ne!(x.values, minhash(&a, 10).values);
}

#[test]
fn mixed_signatures_are_rejected() {
    let a = shingle_text(DocId(1), "a b c d e f").unwrap();
    let s1 = MinHasher::new(250, 1).signature(&a);
    let s2 = MinHasher::new(250, 2).signature(&a);
    let s3 = MinHasher::new(100, 1).signature(&a);
    assert!(LshIndex::build(&[s1.clone(), s2], LshParams::default()).is_err());
    assert!(LshIndex::build(&[s1, s3], LshParams::default()).is_err());
}

#[test]
fn batches_are_time_ordered_and_cross_batch_copies_survive() {
    let text = words(4, 60).join(" ");
    let docs: Vec<Document> = [30, 10, 20, 40].iter().map(|&t| doc(&format!("u{t}"), t, &text)).collect();
    let batches = batch_planner(docs, 2);
    let times: Vec<Vec<i64>> = batches.iter().map(|b| b.docs.iter().map(|d| d.fetched_at).collect()).collect();
    assert_eq!(times, vec![vec![10, 20], vec![30, 40]]);
    let kept: usize = batches
        .iter()
        .map(|b| dedup_batch(&b.docs, &DedupParams::default()).unwrap().survivors.len())
        .sum();
    assert_eq!(kept, 2);
}
