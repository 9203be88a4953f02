use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::lang::Lang;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub docs_in: u64,
    pub docs_out: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.docs_in += o.docs_in;
        self.docs_out += o.docs_out;
        self.tokens_in += o.tokens_in;
        self.tokens_out += o.tokens_out;
    }
}

/// Accounting for one shard of one stage; persisted beside the shard.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardStats {
    #[serde(flatten)]
    pub counts: Counts,
    pub drops: BTreeMap<String, u64>,
    pub per_lang: BTreeMap<Lang, Counts>,
}

impl ShardStats {
    /// Counts an input document. Output languages are counted by
    /// [`kept`](Self::kept), so a relabelling stage moves documents between
    /// language rows.
    pub fn input(&mut self, doc: &Document) {
        let words = doc.word_count();
        self.counts.docs_in += 1;
        self.counts.tokens_in += words;
        let l = self.per_lang.entry(doc.lang).or_default();
        l.docs_in += 1;
        l.tokens_in += words;
    }

    pub fn kept(&mut self, doc: &Document) {
        let words = doc.word_count();
        self.counts.docs_out += 1;
        self.counts.tokens_out += words;
        let l = self.per_lang.entry(doc.lang).or_default();
        l.docs_out += 1;
        l.tokens_out += words;
    }

    pub fn dropped(&mut self, reason: impl Into<String>) {
        *self.drops.entry(reason.into()).or_default() += 1;
    }

    pub fn merge(&mut self, o: &ShardStats) {
        self.counts.add(&o.counts);
        for (k, v) in &o.drops {
            *self.drops.entry(k.clone()).or_default() += v;
        }
        for (l, c) in &o.per_lang {
            self.per_lang.entry(*l).or_default().add(c);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    #[serde(flatten)]
    pub counts: Counts,
    pub drops: BTreeMap<String, u64>,
    pub per_lang: BTreeMap<Lang, Counts>,
    pub shards: usize,
    /// Wall time spent in this invocation; resumed work is not included.
    pub wall_time_ms: u64,
    /// Stage-specific results, such as calibrated cutoffs or tokenizer scores.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl StageReport {
    pub fn from_stats(stage: &str, stats: &ShardStats, shards: usize) -> StageReport {
        StageReport {
            stage: stage.to_string(),
            counts: stats.counts,
            drops: stats.drops.clone(),
            per_lang: stats.per_lang.clone(),
            shards,
            wall_time_ms: 0,
            details: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub lang: String,
    pub stage: String,
    pub docs: u64,
    pub tokens: u64,
}

/// Output word counts per language (rows) and stage (columns), followed by
/// a total row. Returns the aligned text and the same cells as rows.
pub fn report(reports: &[StageReport]) -> (String, Vec<TableRow>) {
    let mut langs: Vec<Lang> = reports.iter().flat_map(|r| r.per_lang.keys().copied()).collect();
    langs.sort();
    langs.dedup();
    let mut rows = Vec::new();
    for r in reports {
        for &l in &langs {
            let c = r.per_lang.get(&l).copied().unwrap_or_default();
            rows.push(TableRow {
                lang: l.code().to_string(),
                stage: r.stage.clone(),
                docs: c.docs_out,
                tokens: c.tokens_out,
            });
        }
        rows.push(TableRow {
            lang: "total".into(),
            stage: r.stage.clone(),
            docs: r.counts.docs_out,
            tokens: r.counts.tokens_out,
        });
    }
    let widths: Vec<usize> = reports
        .iter()
        .map(|r| {
            let max = rows.iter().filter(|x| x.stage == r.stage).map(|x| x.tokens.to_string().len()).max().unwrap_or(1);
            max.max(r.stage.len())
        })
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:<6}", "lang");
    for (r, w) in reports.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", r.stage);
    }
    out.push('\n');
    let labels: Vec<String> = langs.iter().map(|l| l.code().to_string()).chain(["total".to_string()]).collect();
    for label in &labels {
        let _ = write!(out, "{label:<6}");
        for (r, w) in reports.iter().zip(&widths) {
            let t = rows.iter().find(|x| &x.lang == label && x.stage == r.stage).map_or(0, |x| x.tokens);
            let _ = write!(out, "  {t:>w$}");
        }
        out.push('\n');
    }
    (out, rows)
}
