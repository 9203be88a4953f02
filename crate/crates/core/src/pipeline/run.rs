use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::checkpoint::{write_atomic, Checkpoint};
use super::config::{PipelineConfig, StageConfig, StageKind};
use super::report::{report, ShardStats, StageReport};
use super::PipelineError;
use crate::corpus::ingest::{ingest, IngestStats, InputKind};
use crate::corpus::shard::{discard_partials, partial_marker};
use crate::corpus::{read_shard_all, write_shard_file, Document};
use crate::dedup::{dedup_batch, plan_batch_indices, DedupParams, DedupReport};
use crate::heuristics::{
    apply_basic_filter, apply_full_filter, calibrate_percentiles, compute_features, train_perplexity_models,
    FeatureVector, FilterConfig, HeuristicsError, PerplexityModels, Verdict, MIN_CALIBRATION_SAMPLE,
};
use crate::lang::Lang;
use crate::langid::{read_labeled, LangModel};
use crate::tokenizer::{clean_train, evaluate, train_bpe, CharFilter, TokenizerModel, TrainConfig};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const DEFAULT_DOCS_PER_SHARD: usize = 1000;
pub const TOKENIZER_FILE: &str = "tokenizer.itok";

/// Resume behaviour and fault injection.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub resume: bool,
    /// Let this many shard commits succeed, then abandon the next shard
    /// half-written and return [`PipelineError::Interrupted`].
    pub fail_after_commits: Option<usize>,
    /// Return [`PipelineError::Interrupted`] once this stage completes.
    pub stop_after_stage: Option<StageKind>,
}

pub fn stage_dir(work_dir: &Path, kind: StageKind) -> PathBuf {
    work_dir.join("stages").join(kind.name())
}

fn part_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("part-{i:05}.jsonl"))
}

fn stats_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("part-{i:05}.stats.json"))
}

fn list_parts(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut parts: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let n = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            n.starts_with("part-") && n.ends_with(".jsonl")
        })
        .collect();
    parts.sort();
    Ok(parts)
}

fn input_files(input: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        return Err(PipelineError::Data(format!("input {} does not exist", input.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && InputKind::of(p).is_some())
        .collect();
    files.sort();
    Ok(files)
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    opts: &'a RunOptions,
    checkpoint: Mutex<Checkpoint>,
    checkpoint_path: PathBuf,
    attempts: AtomicUsize,
}

/// What a per-shard stage does with one document.
enum Decision {
    Keep(Document),
    Drop(String),
}

impl Runner<'_> {
    fn save_checkpoint(&self, f: impl FnOnce(&mut Checkpoint)) -> Result<(), PipelineError> {
        let mut cp = self.checkpoint.lock().expect("checkpoint lock");
        f(&mut cp);
        cp.save(&self.checkpoint_path)
    }

    fn is_shard_done(&self, stage: StageKind, i: usize, dir: &Path) -> bool {
        self.checkpoint.lock().expect("checkpoint lock").is_shard_done(stage.name(), i)
            && part_path(dir, i).exists()
            && stats_path(dir, i).exists()
    }

    /// Writes shard `i` and its stats, then records it in the checkpoint.
    fn commit(&self, stage: StageKind, dir: &Path, i: usize, docs: Vec<Document>, stats: &ShardStats) -> Result<(), PipelineError> {
        let n = self.attempts.fetch_add(1, Ordering::SeqCst);
        let path = part_path(dir, i);
        if self.opts.fail_after_commits.is_some_and(|limit| n >= limit) {
            fs::create_dir_all(dir)?;
            fs::write(partial_marker(&path), b"")?;
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".tmp");
            fs::write(&tmp, b"{\"truncated\":")?;
            return Err(PipelineError::Interrupted(format!("injected failure writing {}", path.display())));
        }
        write_shard_file(&path, docs)?;
        write_atomic(&stats_path(dir, i), &serde_json::to_vec(stats).expect("stats serialize"))?;
        self.save_checkpoint(|cp| {
            cp.stage(stage.name()).completed.insert(i);
        })
    }

    fn collect_stats(&self, dir: &Path, shards: usize) -> Result<ShardStats, PipelineError> {
        let mut total = ShardStats::default();
        for i in 0..shards {
            let b = fs::read(stats_path(dir, i))?;
            let s: ShardStats = serde_json::from_slice(&b)
                .map_err(|e| PipelineError::Data(format!("corrupt stats for shard {i}: {e}")))?;
            total.merge(&s);
        }
        Ok(total)
    }

    /// Applies `decide` to every document of every input shard, one output
    /// shard per input shard.
    fn map_shards<F>(&self, stage: StageKind, inputs: &[PathBuf], dir: &Path, decide: F) -> Result<ShardStats, PipelineError>
    where
        F: Fn(usize, usize, Document) -> Result<Decision, PipelineError> + Sync,
    {
        fs::create_dir_all(dir)?;
        discard_partials(dir)?;
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, input)| {
                if self.is_shard_done(stage, i, dir) {
                    return Ok(());
                }
                let mut stats = ShardStats::default();
                let mut out = Vec::new();
                for (pos, doc) in read_shard_all(input)?.into_iter().enumerate() {
                    stats.input(&doc);
                    match decide(i, pos, doc)? {
                        Decision::Keep(d) => {
                            stats.kept(&d);
                            out.push(d);
                        }
                        Decision::Drop(reason) => stats.dropped(reason),
                    }
                }
                self.commit(stage, dir, i, out, &stats)
            })
            .collect::<Result<Vec<()>, PipelineError>>()?;
        self.collect_stats(dir, inputs.len())
    }

    fn read_all(&self, inputs: &[PathBuf]) -> Result<Vec<Vec<Document>>, PipelineError> {
        Ok(inputs
            .par_iter()
            .map(|p| read_shard_all(p))
            .collect::<Result<Vec<_>, _>>()?)
    }

    fn extract(&self, stage: &StageConfig, dir: &Path) -> Result<(ShardStats, usize, serde_json::Value), PipelineError> {
        let files = input_files(&self.cfg.input)?;
        let ingested: Vec<(Vec<Document>, IngestStats)> = files
            .par_iter()
            .map(|f| ingest(f))
            .collect::<Result<Vec<_>, _>>()?;
        let mut totals = IngestStats::default();
        let mut docs = Vec::new();
        for (d, s) in ingested {
            totals.candidates += s.candidates;
            totals.documents += s.documents;
            totals.non_html += s.non_html;
            totals.empty_text += s.empty_text;
            totals.replacements += s.replacements;
            totals.warc.records += s.warc.records;
            totals.warc.malformed += s.warc.malformed;
            totals.warc.truncated |= s.warc.truncated;
            docs.extend(d);
        }
        let per = stage.max_docs_per_shard.unwrap_or(DEFAULT_DOCS_PER_SHARD);
        let chunks: Vec<Vec<Document>> = docs.chunks(per).map(<[Document]>::to_vec).collect();
        fs::create_dir_all(dir)?;
        discard_partials(dir)?;
        chunks
            .into_par_iter()
            .enumerate()
            .map(|(i, chunk)| {
                if self.is_shard_done(StageKind::Extract, i, dir) {
                    return Ok(());
                }
                let mut stats = ShardStats::default();
                for d in &chunk {
                    stats.input(d);
                    stats.kept(d);
                }
                self.commit(StageKind::Extract, dir, i, chunk, &stats)
            })
            .collect::<Result<Vec<()>, PipelineError>>()?;
        let shards = docs.len().div_ceil(per);
        let details = json!({ "files": files.len(), "ingest": totals });
        Ok((self.collect_stats(dir, shards)?, shards, details))
    }

    fn filter_config(&self, stage: &StageConfig) -> Result<FilterConfig, PipelineError> {
        let mut f = match &stage.filters {
            Some(p) => FilterConfig::from_toml(
                &fs::read_to_string(p).map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", p.display())))?,
            )?,
            None => FilterConfig::default(),
        };
        if let Some(m) = stage.lang_confidence_min {
            f.lang_confidence_min = m;
        }
        Ok(f)
    }

    fn calibrate(
        &self,
        inputs: &[PathBuf],
        filters: &mut FilterConfig,
        ppl: &PerplexityModels,
        p: f64,
    ) -> Result<serde_json::Value, PipelineError> {
        let shards = self.read_all(inputs)?;
        let features: Vec<(Lang, FeatureVector)> = shards
            .par_iter()
            .flat_map_iter(|docs| {
                docs.iter().filter_map(|d| {
                    let fv = compute_features(d, ppl.get(&d.lang));
                    match apply_basic_filter(d, &fv, filters) {
                        Ok(Verdict::Keep) => Some((d.lang, fv)),
                        _ => None,
                    }
                })
            })
            .collect();
        let mut by_lang: BTreeMap<Lang, Vec<FeatureVector>> = BTreeMap::new();
        for (l, fv) in features {
            by_lang.entry(l).or_default().push(fv);
        }
        let mut calibrated = BTreeMap::new();
        let mut skipped = BTreeMap::new();
        for (l, fvs) in by_lang {
            let preset = filters.languages.get(&l).is_some_and(|t| t.percentile_cutoffs.is_some());
            if preset {
                continue;
            }
            if fvs.len() < MIN_CALIBRATION_SAMPLE {
                skipped.insert(l, fvs.len());
                continue;
            }
            let c = calibrate_percentiles(&fvs, p)?;
            filters.set_cutoffs(l, c.clone())?;
            calibrated.insert(l, c);
        }
        Ok(json!({ "percentile": p, "cutoffs": calibrated, "too_few_samples": skipped }))
    }

    fn dedup_plan(&self, stage: &StageConfig, inputs: &[PathBuf], dir: &Path) -> Result<(HashSet<(usize, usize)>, serde_json::Value), PipelineError> {
        let params = DedupParams {
            threshold: stage.threshold.unwrap_or(crate::dedup::DEFAULT_THRESHOLD),
            bands: stage.bands.unwrap_or(crate::dedup::DEFAULT_BANDS),
            rows: stage.rows.unwrap_or(crate::dedup::DEFAULT_ROWS),
            seed: self.cfg.stage_seed(stage),
            batch_capacity: stage.batch_size(),
            verify_exact: stage.verify_exact.unwrap_or(false),
        };
        params.validate()?;
        let shards = self.read_all(inputs)?;
        let origin: Vec<(usize, usize)> = shards
            .iter()
            .enumerate()
            .flat_map(|(s, docs)| (0..docs.len()).map(move |p| (s, p)))
            .collect();
        let doc = |o: &(usize, usize)| &shards[o.0][o.1];
        let times: Vec<i64> = origin.iter().map(|o| doc(o).fetched_at).collect();
        let mut dropped = HashSet::new();
        let mut total = DedupReport::default();
        let mut dump = String::new();
        let batches = plan_batch_indices(&times, params.batch_capacity);
        for idx in &batches {
            let batch: Vec<Document> = idx.iter().map(|&i| doc(&origin[i]).clone()).collect();
            let out = dedup_batch(&batch, &params)?;
            let keep: HashSet<usize> = out.survivors.iter().copied().collect();
            for (k, &i) in idx.iter().enumerate() {
                if !keep.contains(&k) {
                    dropped.insert(origin[i]);
                }
            }
            for c in &out.clusters {
                for d in &c.duplicates {
                    dump.push_str(&format!("{}\t{}\n", c.survivor, d));
                }
            }
            let r = out.report;
            total.docs_in += r.docs_in;
            total.docs_out += r.docs_out;
            total.unshingled += r.unshingled;
            total.candidate_pairs += r.candidate_pairs;
            total.merged_pairs += r.merged_pairs;
            total.clusters += r.clusters;
            total.exact_disagreements += r.exact_disagreements;
        }
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("clusters.tsv"), dump.as_bytes())?;
        Ok((dropped, json!({ "params": params, "batches": batches.len(), "result": total })))
    }

    fn sample_plan(&self, stage: &StageConfig, inputs: &[PathBuf]) -> Result<HashSet<(usize, usize)>, PipelineError> {
        let seed = self.cfg.stage_seed(stage);
        let size = stage.size.unwrap_or(0);
        let shards = self.read_all(inputs)?;
        let mut keyed: Vec<(u64, usize, usize)> = shards
            .iter()
            .enumerate()
            .flat_map(|(s, docs)| {
                docs.iter()
                    .enumerate()
                    .map(move |(p, d)| (xxh3_64_with_seed(&d.id.0.to_le_bytes(), seed), s, p))
            })
            .collect();
        keyed.sort_unstable();
        Ok(keyed.into_iter().take(size).map(|(_, s, p)| (s, p)).collect())
    }

    fn train_config(&self, stage: &StageConfig) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            vocab_size: stage.vocab_size.unwrap_or(d.vocab_size),
            character_coverage: stage.character_coverage(),
            corpus_sample_size: None,
            byte_fallback: stage.byte_fallback.unwrap_or(d.byte_fallback),
            split_digits: stage.split_digits.unwrap_or(d.split_digits),
            seed: self.cfg.stage_seed(stage),
        }
    }

    fn tok_train(&self, stage: &StageConfig, inputs: &[PathBuf], dir: &Path) -> Result<(ShardStats, serde_json::Value), PipelineError> {
        let shards = self.read_all(inputs)?;
        let mut stats = ShardStats::default();
        for d in shards.iter().flatten() {
            stats.input(d);
            stats.kept(d);
        }
        let texts: Vec<&str> = shards.iter().flatten().map(|d| d.text.as_str()).collect();
        let tc = self.train_config(stage);
        let mut details = json!({});
        let model = if stage.clean.unwrap_or(false) {
            let filter = match &stage.char_filter {
                Some(p) => CharFilter::default().parse_overrides(
                    &fs::read_to_string(p).map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", p.display())))?,
                )?,
                None => CharFilter::default(),
            };
            let out = clean_train(&texts, &tc, &filter)?;
            details = json!({
                "banned_pieces": out.banned_pieces,
                "words_before_cleaning": out.words_before,
                "words_after_cleaning": out.words_after,
            });
            out.model
        } else {
            train_bpe(&texts, &tc)?
        };
        let mut bytes = Vec::new();
        model.write_to(&mut bytes)?;
        write_atomic(&dir.join(TOKENIZER_FILE), &bytes)?;
        let mut vocab = Vec::new();
        model.write_vocab(&mut vocab)?;
        write_atomic(&dir.join("tokenizer.vocab"), &vocab)?;
        details["vocab_size"] = json!(model.vocab_size());
        details["merges"] = json!(model.merges().len());
        details["alphabet"] = json!(model.alphabet().len());
        Ok((stats, details))
    }

    fn tok_eval(&self, stage: &StageConfig, inputs: &[PathBuf]) -> Result<(ShardStats, serde_json::Value), PipelineError> {
        let model = TokenizerModel::load(&stage_dir(&self.cfg.work_dir, StageKind::TokTrain).join(TOKENIZER_FILE))?;
        let shards = self.read_all(inputs)?;
        let mut stats = ShardStats::default();
        for d in shards.iter().flatten() {
            stats.input(d);
            stats.kept(d);
        }
        let eval_docs: Vec<Document> = match &stage.eval {
            Some(p) => ingest(p)?.0,
            None => shards.into_iter().flatten().collect(),
        };
        let mut by_lang: BTreeMap<Lang, Vec<&str>> = BTreeMap::new();
        for d in &eval_docs {
            by_lang.entry(d.lang).or_default().push(&d.text);
        }
        let mut per_lang = BTreeMap::new();
        for (l, texts) in by_lang {
            if let Ok(c) = evaluate(&model, &texts) {
                per_lang.insert(
                    l,
                    json!({
                        "words": c.words,
                        "tokens": c.tokens,
                        "token_to_word_ratio": c.token_to_word_ratio(),
                        "exact_score": c.exact_score(),
                    }),
                );
            }
        }
        Ok((stats, json!({ "per_lang": per_lang })))
    }

    fn run_stage(&self, stage: &StageConfig, inputs: &[PathBuf]) -> Result<(StageReport, Vec<PathBuf>), PipelineError> {
        let kind = stage.kind;
        let dir = stage_dir(&self.cfg.work_dir, kind);
        let mk = |stats: &ShardStats, shards: usize, details: serde_json::Value| {
            let mut r = StageReport::from_stats(kind.name(), stats, shards);
            r.details = details;
            r
        };
        let map = |decide: &(dyn Fn(usize, usize, Document) -> Result<Decision, PipelineError> + Sync)| {
            self.map_shards(kind, inputs, &dir, decide)
        };
        let report = match kind {
            StageKind::Extract => {
                let (stats, shards, details) = self.extract(stage, &dir)?;
                mk(&stats, shards, details)
            }
            StageKind::Langid => {
                let path = stage.model.as_ref().expect("validated");
                let model = LangModel::load(path)
                    .map_err(|e| PipelineError::Config(format!("cannot load language model {}: {e}", path.display())))?;
                let stats = map(&|_, _, mut d| {
                    let c = model.classify(&d.text);
                    d.set_lang(c.lang, c.confidence);
                    Ok(Decision::Keep(d))
                })?;
                mk(&stats, inputs.len(), serde_json::Value::Null)
            }
            StageKind::BasicFilter => {
                let filters = self.filter_config(stage)?;
                let stats = map(&|_, _, d| {
                    let fv = compute_features(&d, None);
                    Ok(match apply_basic_filter(&d, &fv, &filters) {
                        Ok(Verdict::Keep) => Decision::Keep(d),
                        Ok(Verdict::Drop(r)) => Decision::Drop(r.name()),
                        Err(HeuristicsError::UnknownLanguage(_)) => Decision::Drop("unconfigured_language".into()),
                        Err(e) => return Err(e.into()),
                    })
                })?;
                mk(&stats, inputs.len(), json!({ "lang_confidence_min": filters.lang_confidence_min }))
            }
            StageKind::FullFilter => {
                let mut filters = self.filter_config(stage)?;
                let ppl = match &stage.ppl_sample {
                    Some(p) => {
                        let f = fs::File::open(p)
                            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", p.display())))?;
                        let labeled = read_labeled(std::io::BufReader::new(f))?;
                        train_perplexity_models(labeled.iter().map(|(l, t)| (*l, t.as_str())))
                    }
                    None => PerplexityModels::new(),
                };
                let details = self.calibrate(inputs, &mut filters, &ppl, stage.percentile())?;
                let stats = map(&|_, _, d| {
                    let fv = compute_features(&d, ppl.get(&d.lang));
                    Ok(match apply_full_filter(&d, &fv, &filters) {
                        Ok(Verdict::Keep) => Decision::Keep(d),
                        Ok(Verdict::Drop(r)) => Decision::Drop(r.name()),
                        Err(HeuristicsError::UnknownLanguage(_)) => Decision::Drop("unconfigured_language".into()),
                        Err(HeuristicsError::MissingCutoffs(_)) => Decision::Drop("uncalibrated".into()),
                        Err(e) => return Err(e.into()),
                    })
                })?;
                mk(&stats, inputs.len(), details)
            }
            StageKind::Dedup => {
                let (dropped, details) = self.dedup_plan(stage, inputs, &dir)?;
                let stats = map(&|s, p, d| {
                    Ok(if dropped.contains(&(s, p)) {
                        Decision::Drop("near_duplicate".into())
                    } else {
                        Decision::Keep(d)
                    })
                })?;
                mk(&stats, inputs.len(), details)
            }
            StageKind::Sample => {
                let chosen = self.sample_plan(stage, inputs)?;
                let stats = map(&|s, p, d| {
                    Ok(if chosen.contains(&(s, p)) {
                        Decision::Keep(d)
                    } else {
                        Decision::Drop("not_sampled".into())
                    })
                })?;
                mk(&stats, inputs.len(), json!({ "size": stage.size }))
            }
            StageKind::TokTrain => {
                let (stats, details) = self.tok_train(stage, inputs, &dir)?;
                mk(&stats, 0, details)
            }
            StageKind::TokEval => {
                let (stats, details) = self.tok_eval(stage, inputs)?;
                mk(&stats, 0, details)
            }
        };
        let outputs = if kind.writes_shards() {
            list_parts(&dir)?
        } else {
            inputs.to_vec()
        };
        Ok((report, outputs))
    }
}

fn reports_dir(work_dir: &Path) -> PathBuf {
    work_dir.join("reports")
}

/// Runs every configured stage in order and returns their reports.
pub fn run(cfg: &PipelineConfig, opts: &RunOptions) -> Result<Vec<StageReport>, PipelineError> {
    cfg.validate()?;
    let hash = cfg.config_hash();
    let cp_path = cfg.work_dir.join(CHECKPOINT_FILE);
    let checkpoint = match (opts.resume, Checkpoint::load(&cp_path)?) {
        (true, Some(cp)) => {
            if cp.config_hash != hash {
                return Err(PipelineError::ConfigHashMismatch {
                    found: cp.config_hash,
                    current: hash,
                });
            }
            cp
        }
        _ => {
            for d in [cfg.work_dir.join("stages"), reports_dir(&cfg.work_dir)] {
                if d.exists() {
                    fs::remove_dir_all(&d)?;
                }
            }
            let cp = Checkpoint::new(hash);
            cp.save(&cp_path)?;
            cp
        }
    };
    let runner = Runner {
        cfg,
        opts,
        checkpoint: Mutex::new(checkpoint),
        checkpoint_path: cp_path,
        attempts: AtomicUsize::new(0),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;

    pool.install(|| {
        let mut reports = Vec::new();
        let mut inputs: Vec<PathBuf> = Vec::new();
        let rdir = reports_dir(&cfg.work_dir);
        for stage in &cfg.stages {
            let name = stage.kind.name();
            let report_path = rdir.join(format!("{name}.json"));
            let done = runner.checkpoint.lock().expect("checkpoint lock").is_done(name);
            let report = if done && report_path.exists() {
                let r: StageReport = serde_json::from_slice(&fs::read(&report_path)?)
                    .map_err(|e| PipelineError::Data(format!("corrupt report {}: {e}", report_path.display())))?;
                if stage.kind.writes_shards() {
                    inputs = list_parts(&stage_dir(&cfg.work_dir, stage.kind))?;
                }
                r
            } else {
                let t = Instant::now();
                let (mut r, outputs) = runner.run_stage(stage, &inputs)?;
                r.wall_time_ms = t.elapsed().as_millis() as u64;
                write_atomic(&report_path, &serde_json::to_vec_pretty(&r).expect("report serializes"))?;
                runner.save_checkpoint(|cp| cp.stage(name).done = true)?;
                inputs = outputs;
                r
            };
            reports.push(report);
            if opts.stop_after_stage == Some(stage.kind) {
                return Err(PipelineError::Interrupted(format!("stopped after stage `{name}`")));
            }
        }
        let (text, rows) = report(&reports);
        write_atomic(&rdir.join("summary.txt"), text.as_bytes())?;
        write_atomic(&rdir.join("table.json"), &serde_json::to_vec_pretty(&rows).expect("rows serialize"))?;
        Ok(reports)
    })
}
