use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use super::PipelineError;
use crate::dedup::DEFAULT_BATCH_CAPACITY;
use crate::heuristics::DEFAULT_PERCENTILE;
use crate::tokenizer::DEFAULT_COVERAGE;

pub const ENV_PREFIX: &str = "REFINERY_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Extract,
    Langid,
    BasicFilter,
    FullFilter,
    Dedup,
    Sample,
    TokTrain,
    TokEval,
}

impl StageKind {
    pub fn name(self) -> &'static str {
        match self {
            StageKind::Extract => "extract",
            StageKind::Langid => "langid",
            StageKind::BasicFilter => "basic_filter",
            StageKind::FullFilter => "full_filter",
            StageKind::Dedup => "dedup",
            StageKind::Sample => "sample",
            StageKind::TokTrain => "tok_train",
            StageKind::TokEval => "tok_eval",
        }
    }

    /// Whether the stage writes document shards.
    pub fn writes_shards(self) -> bool {
        !matches!(self, StageKind::TokTrain | StageKind::TokEval)
    }
}

impl std::fmt::Display for StageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One `[[stage]]` block. Fields irrelevant to a stage's kind are rejected
/// by [`PipelineConfig::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub kind: StageKind,
    /// extract: documents per output shard.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_docs_per_shard: Option<usize>,
    /// langid: trained `.lid` model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// filters: threshold file; built-in defaults otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filters: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang_confidence_min: Option<f64>,
    /// full_filter: calibration quantile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percentile: Option<f64>,
    /// full_filter: labelled clean text for the perplexity models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppl_sample: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_exact: Option<bool>,
    /// sample: documents kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub character_coverage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub byte_fallback: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_digits: Option<bool>,
    /// tok_train: run the dummy-model cleaning pass first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean: Option<bool>,
    /// tok_train: allow/ban override file for cleaning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_filter: Option<PathBuf>,
    /// tok_eval: evaluation documents; the stage input otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<PathBuf>,
    /// Overrides the run seed for this stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl StageConfig {
    pub fn new(kind: StageKind) -> StageConfig {
        StageConfig {
            kind,
            max_docs_per_shard: None,
            model: None,
            filters: None,
            lang_confidence_min: None,
            percentile: None,
            ppl_sample: None,
            threshold: None,
            bands: None,
            rows: None,
            batch_size: None,
            verify_exact: None,
            size: None,
            vocab_size: None,
            character_coverage: None,
            byte_fallback: None,
            split_digits: None,
            clean: None,
            char_filter: None,
            eval: None,
            seed: None,
        }
    }

    fn set_fields(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        macro_rules! chk {
            ($($f:ident),*) => { $( if self.$f.is_some() { v.push(stringify!($f)); } )* };
        }
        chk!(
            max_docs_per_shard, model, filters, lang_confidence_min, percentile, ppl_sample, threshold, bands, rows,
            batch_size, verify_exact, size, vocab_size, character_coverage, byte_fallback, split_digits, clean,
            char_filter, eval
        );
        v
    }

    fn allowed_fields(&self) -> &'static [&'static str] {
        match self.kind {
            StageKind::Extract => &["max_docs_per_shard"],
            StageKind::Langid => &["model"],
            StageKind::BasicFilter => &["filters", "lang_confidence_min"],
            StageKind::FullFilter => &["filters", "lang_confidence_min", "percentile", "ppl_sample"],
            StageKind::Dedup => &["threshold", "bands", "rows", "batch_size", "verify_exact"],
            StageKind::Sample => &["size"],
            StageKind::TokTrain => &["vocab_size", "character_coverage", "byte_fallback", "split_digits", "clean", "char_filter"],
            StageKind::TokEval => &["eval"],
        }
    }

    pub fn percentile(&self) -> f64 {
        self.percentile.unwrap_or(DEFAULT_PERCENTILE)
    }

    pub fn character_coverage(&self) -> f64 {
        self.character_coverage.unwrap_or(DEFAULT_COVERAGE)
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or(DEFAULT_BATCH_CAPACITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// An input file or a directory of `.warc[.gz]`, `.jsonl[.gz]` and `.txt`
    /// files.
    pub input: PathBuf,
    pub work_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "stage")]
    pub stages: Vec<StageConfig>,
}

fn default_workers() -> usize {
    1
}

impl PipelineConfig {
    /// Parses TOML. Relative paths are resolved against `base`.
    pub fn from_toml(src: &str, base: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
        let mut cfg: PipelineConfig = toml::from_str(src).map_err(|e| PipelineError::Config(e.to_string()))?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        PipelineConfig::from_toml(&src, path.parent())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input);
        fix(&mut self.work_dir);
        for s in &mut self.stages {
            for p in [&mut s.model, &mut s.filters, &mut s.ppl_sample, &mut s.char_filter, &mut s.eval]
                .into_iter()
                .flatten()
            {
                fix(p);
            }
        }
    }

    /// Applies `REFINERY_WORKERS`, `REFINERY_SEED`, `REFINERY_INPUT` and
    /// `REFINERY_WORK_DIR`.
    pub fn apply_env<F>(&mut self, var: F) -> Result<(), PipelineError>
    where
        F: Fn(&str) -> Option<String>,
    {
        let get = |k: &str| var(&format!("{ENV_PREFIX}{k}"));
        let num = |k: &str, v: String| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| PipelineError::Config(format!("{ENV_PREFIX}{k}: `{v}` is not a non-negative integer")))
        };
        if let Some(v) = get("WORKERS") {
            self.workers = num("WORKERS", v)? as usize;
        }
        if let Some(v) = get("SEED") {
            self.seed = num("SEED", v)?;
        }
        if let Some(v) = get("INPUT") {
            self.input = v.into();
        }
        if let Some(v) = get("WORK_DIR") {
            self.work_dir = v.into();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(m));
        if self.workers == 0 {
            return err("workers must be at least 1".into());
        }
        if self.stages.first().map(|s| s.kind) != Some(StageKind::Extract) {
            return err("the first stage must be `extract`".into());
        }
        let pos = |k: StageKind| self.stages.iter().position(|s| s.kind == k);
        for (i, s) in self.stages.iter().enumerate() {
            if pos(s.kind) != Some(i) {
                return err(format!("stage `{}` appears more than once", s.kind));
            }
            if let Some(f) = s.set_fields().into_iter().find(|f| !s.allowed_fields().contains(f)) {
                return err(format!("stage `{}` does not take `{f}`", s.kind));
            }
            let before = |k: StageKind| pos(k).is_some_and(|j| j < i);
            let need = |k: StageKind| -> Result<(), PipelineError> {
                if before(k) {
                    Ok(())
                } else {
                    Err(PipelineError::Config(format!("stage `{}` requires an earlier `{k}` stage", s.kind)))
                }
            };
            match s.kind {
                StageKind::BasicFilter | StageKind::FullFilter => need(StageKind::Langid)?,
                StageKind::Dedup => {
                    for f in [StageKind::BasicFilter, StageKind::FullFilter] {
                        if pos(f).is_some_and(|j| j > i) {
                            return err(format!("`{f}` must run before `dedup`"));
                        }
                    }
                }
                StageKind::TokTrain => need(StageKind::Sample)?,
                StageKind::TokEval => need(StageKind::TokTrain)?,
                _ => {}
            }
            if s.kind == StageKind::Langid && s.model.is_none() {
                return err("stage `langid` requires `model`".into());
            }
            if s.kind == StageKind::Sample && s.size.is_none() {
                return err("stage `sample` requires `size`".into());
            }
            if s.max_docs_per_shard == Some(0) || s.batch_size == Some(0) {
                return err(format!("stage `{}`: sizes must be positive", s.kind));
            }
            if let Some(p) = s.percentile.filter(|p| !(0.0..=1.0).contains(p)) {
                return err(format!("percentile {p} outside [0,1]"));
            }
        }
        Ok(())
    }

    /// Hash of everything that influences outputs; the worker count does not.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        let json = serde_json::to_vec(&c).expect("config serializes");
        format!("{:016x}", xxh3_64(&json))
    }

    pub fn stage_seed(&self, s: &StageConfig) -> u64 {
        s.seed.unwrap_or(self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "input = \"in\"\nwork_dir = \"w\"\n[[stage]]\nkind = \"extract\"\n";

    #[test]
    fn parses_and_orders() {
        let src = format!("{BASE}[[stage]]\nkind = \"langid\"\nmodel = \"m.lid\"\n[[stage]]\nkind = \"basic_filter\"\n");
        let c = PipelineConfig::from_toml(&src, Some(Path::new("/base"))).unwrap();
        assert_eq!(c.stages.len(), 3);
        assert_eq!(c.input, PathBuf::from("/base/in"));
        assert_eq!(c.stages[1].model.as_deref(), Some(Path::new("/base/m.lid")));
    }

    #[test]
    fn rejects_bad_order_and_fields() {
        let filter_first = format!("{BASE}[[stage]]\nkind = \"basic_filter\"\n");
        assert!(PipelineConfig::from_toml(&filter_first, None).is_err());
        let wrong_field = format!("{BASE}[[stage]]\nkind = \"sample\"\nsize = 3\nvocab_size = 9\n");
        assert!(PipelineConfig::from_toml(&wrong_field, None).is_err());
        let tok_without_sample = format!("{BASE}[[stage]]\nkind = \"tok_train\"\n");
        assert!(PipelineConfig::from_toml(&tok_without_sample, None).is_err());
        let twice = format!("{BASE}[[stage]]\nkind = \"extract\"\n");
        assert!(PipelineConfig::from_toml(&twice, None).is_err());
    }

    #[test]
    fn hash_ignores_workers_and_env_applies() {
        let mut c = PipelineConfig::from_toml(BASE, None).unwrap();
        let h = c.config_hash();
        c.apply_env(|k| (k == "REFINERY_WORKERS").then(|| "8".to_string())).unwrap();
        assert_eq!(c.workers, 8);
        assert_eq!(c.config_hash(), h);
        c.apply_env(|k| (k == "REFINERY_SEED").then(|| "5".to_string())).unwrap();
        assert_ne!(c.config_hash(), h);
        assert!(c.apply_env(|k| (k == "REFINERY_WORKERS").then(|| "x".to_string())).is_err());
    }
}
