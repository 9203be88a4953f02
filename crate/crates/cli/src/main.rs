use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use refinery::corpus::ingest::ingest;
use refinery::corpus::shard::{read_shard_all, write_shard};
use refinery::corpus::Document;
use refinery::dedup::{dedup_batch, plan_batch_indices, DedupParams};
use refinery::heuristics::{
    apply_basic_filter, apply_full_filter, calibrate_percentiles, compute_features, FeatureVector, FilterConfig,
    HeuristicsError, Verdict, DEFAULT_PERCENTILE, MIN_CALIBRATION_SAMPLE,
};
use refinery::lang::Lang;
use refinery::langid::{read_labeled, train_langid};
use refinery::pipeline::{report, PipelineConfig, PipelineError, RunOptions, StageReport};
use refinery::tokenizer::{
    clean_train, compare_tokenizers, evaluate, format_comparison, parse_external_counts, train_bpe, CharFilter,
    TokenizerModel, TrainConfig, DEFAULT_COVERAGE,
};

/// Corpus refinement and tokenizer training.
#[derive(Parser)]
#[command(name = "refinery", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a configured multi-stage pipeline.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Continue from the checkpoint in the work directory.
        #[arg(long)]
        resume: bool,
    },
    /// Turn WARC, text or document files into document shards.
    Extract {
        #[arg(long = "in")]
        input: Vec<PathBuf>,
        /// Shard prefix; shards become `{prefix}-00000.jsonl`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        max_docs_per_shard: usize,
        #[arg(long)]
        gzip: bool,
    },
    /// Train a language identifier from `{"lang","text"}` lines.
    LangidTrain {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the quality filters to labelled documents.
    Filter {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Basic)]
        mode: Mode,
        /// Documents whose features set the percentile cutoffs.
        #[arg(long)]
        calibrate_from: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
        percentile: f64,
        #[arg(long)]
        lang_confidence_min: Option<f64>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the threshold table and exit.
        #[arg(long)]
        print_defaults: bool,
        /// Write the effective config (with calibrated cutoffs) as TOML.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// Remove near-duplicates from document shards.
    Dedup {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        #[arg(long, default_value_t = 25)]
        bands: usize,
        #[arg(long, default_value_t = 10)]
        rows: usize,
        #[arg(long, default_value_t = 250)]
        perms: usize,
        #[arg(long, default_value_t = refinery::dedup::DEFAULT_BATCH_CAPACITY)]
        batch_size: usize,
        #[arg(long, default_value_t = refinery::dedup::DEFAULT_DEDUP_SEED)]
        seed: u64,
        #[arg(long)]
        verify_exact: bool,
    },
    /// Train a BPE tokenizer.
    TokTrain {
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train a dummy tokenizer, drop words it cannot encode, then train the
    /// final tokenizer on the cleaned text.
    TokCleanTrain {
        #[command(flatten)]
        train: TrainArgs,
        /// `allow` / `ban` / `ban-token` overrides on top of the Indic allowlist.
        #[arg(long)]
        char_filter: Option<PathBuf>,
        /// Also write the cleaned corpus here.
        #[arg(long)]
        cleaned_out: Option<PathBuf>,
    },
    /// Score a tokenizer on a corpus.
    TokEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Ratio)]
        metric: Metric,
    },
    /// Token-to-word ratios of several tokenizers across languages.
    TokCompare {
        /// `name=path/to/model.itok`, repeatable.
        #[arg(long = "model")]
        models: Vec<String>,
        /// `lang=path/to/corpus`, repeatable.
        #[arg(long = "eval")]
        evals: Vec<String>,
        /// `tokenizer<TAB>lang<TAB>tokens<TAB>words` rows from another toolkit.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print the accounting table of a finished run.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Basic,
    Full,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Ratio,
    Exact,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Text lines (`.txt`) or documents (`.jsonl`); directories are read whole.
    #[arg(long = "in")]
    input: PathBuf,
    /// Model path; a `.vocab` dump is written beside it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    vocab_size: usize,
    #[arg(long, default_value_t = DEFAULT_COVERAGE)]
    character_coverage: f64,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    no_byte_fallback: bool,
    #[arg(long)]
    no_split_digits: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            vocab_size: self.vocab_size,
            character_coverage: self.character_coverage,
            corpus_sample_size: self.sample_size,
            byte_fallback: !self.no_byte_fallback,
            split_digits: !self.no_split_digits,
            seed: self.seed,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

fn config_err(m: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: m.to_string() }
}

fn data_err(m: impl std::fmt::Display) -> Failure {
    Failure { code: 3, message: m.to_string() }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn read_file(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))
}

fn files_in(p: &Path) -> Result<Vec<PathBuf>> {
    if p.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(p)
            .map_err(data_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|f| f.is_file() && refinery::corpus::ingest::InputKind::of(f).is_some())
            .collect();
        v.sort();
        Ok(v)
    } else if p.exists() {
        Ok(vec![p.to_path_buf()])
    } else {
        Err(data_err(format!("{} does not exist", p.display())))
    }
}

fn read_docs(p: &Path) -> Result<Vec<Document>> {
    let mut out = Vec::new();
    for f in files_in(p)? {
        out.extend(read_shard_all(&f).map_err(data_err)?);
    }
    Ok(out)
}

/// Text lines from `.txt` files, document texts from shards.
fn read_texts(p: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for f in files_in(p)? {
        if f.extension().is_some_and(|e| e == "txt") {
            let r = BufReader::new(fs::File::open(&f).map_err(data_err)?);
            for line in r.lines() {
                out.push(line.map_err(data_err)?);
            }
        } else {
            out.extend(read_shard_all(&f).map_err(data_err)?.into_iter().map(|d| d.text));
        }
    }
    Ok(out)
}

fn write_docs_jsonl(p: &Path, docs: &[Document]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(p).map_err(data_err)?);
    for d in docs {
        serde_json::to_writer(&mut f, d).map_err(data_err)?;
        f.write_all(b"\n").map_err(data_err)?;
    }
    f.flush().map_err(data_err)
}

fn save_model(m: &TokenizerModel, out: &Path) -> Result<()> {
    m.save(out).map_err(data_err)?;
    let mut v = Vec::new();
    m.write_vocab(&mut v).map_err(data_err)?;
    fs::write(out.with_extension("vocab"), v).map_err(data_err)
}

fn filter_cmd(
    config: Option<PathBuf>,
    mode: Mode,
    calibrate_from: Option<PathBuf>,
    percentile: f64,
    lang_confidence_min: Option<f64>,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
    print_defaults: bool,
    write_config: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = match &config {
        Some(p) => FilterConfig::from_toml(&read_file(p)?).map_err(config_err)?,
        None => FilterConfig::default(),
    };
    if let Some(m) = lang_confidence_min {
        cfg.lang_confidence_min = m;
    }
    if print_defaults {
        for row in cfg.table_rows() {
            println!("{row}");
        }
        return Ok(());
    }
    if let Some(sample) = &calibrate_from {
        let mut by_lang: BTreeMap<Lang, Vec<FeatureVector>> = BTreeMap::new();
        for d in read_docs(sample)? {
            let fv = compute_features(&d, None);
            if let Ok(Verdict::Keep) = apply_basic_filter(&d, &fv, &cfg) {
                by_lang.entry(d.lang).or_default().push(fv);
            }
        }
        for (l, fvs) in by_lang {
            if fvs.len() < MIN_CALIBRATION_SAMPLE {
                eprintln!("{l}: {} calibration documents, need {MIN_CALIBRATION_SAMPLE}; left uncalibrated", fvs.len());
                continue;
            }
            let c = calibrate_percentiles(&fvs, percentile).map_err(config_err)?;
            cfg.set_cutoffs(l, c).map_err(config_err)?;
        }
    }
    if let Some(p) = &write_config {
        fs::write(p, cfg.to_toml()).map_err(data_err)?;
    }
    let (Some(input), Some(out)) = (input, out) else {
        if write_config.is_some() {
            return Ok(());
        }
        return Err(config_err("--in and --out are required unless --print-defaults or --write-config is given"));
    };
    let mut kept = Vec::new();
    let mut reasons: BTreeMap<String, u64> = BTreeMap::new();
    let docs = read_docs(&input)?;
    let total = docs.len();
    for d in docs {
        let fv = compute_features(&d, None);
        let v = match mode {
            Mode::Basic => apply_basic_filter(&d, &fv, &cfg),
            Mode::Full => apply_full_filter(&d, &fv, &cfg),
        };
        match v {
            Ok(Verdict::Keep) => kept.push(d),
            Ok(Verdict::Drop(r)) => *reasons.entry(r.name()).or_default() += 1,
            Err(HeuristicsError::UnknownLanguage(l)) => {
                return Err(data_err(format!("document {} has language `{l}` with no configured thresholds", d.id)))
            }
            Err(e) => return Err(config_err(e)),
        }
    }
    write_docs_jsonl(&out, &kept)?;
    println!(
        "{}",
        serde_json::json!({ "docs_in": total, "docs_out": kept.len(), "drops": reasons })
    );
    Ok(())
}

fn dedup_cmd(input: &Path, out: &Path, params: DedupParams, perms: usize) -> Result<()> {
    if params.bands * params.rows != perms {
        return Err(config_err(format!(
            "bands × rows = {} must equal perms = {perms}",
            params.bands * params.rows
        )));
    }
    params.validate().map_err(config_err)?;
    let docs = read_docs(input)?;
    let times: Vec<i64> = docs.iter().map(|d| d.fetched_at).collect();
    let mut keep = vec![true; docs.len()];
    let mut dump = String::new();
    let mut candidates = 0;
    let mut disagreements = 0;
    for idx in plan_batch_indices(&times, params.batch_capacity) {
        let batch: Vec<Document> = idx.iter().map(|&i| docs[i].clone()).collect();
        let res = dedup_batch(&batch, &params).map_err(data_err)?;
        let survivors: std::collections::HashSet<usize> = res.survivors.iter().copied().collect();
        for (k, &i) in idx.iter().enumerate() {
            keep[i] = survivors.contains(&k);
        }
        for c in &res.clusters {
            for d in &c.duplicates {
                dump.push_str(&format!("{}\t{}\n", c.survivor, d));
            }
        }
        candidates += res.report.candidate_pairs;
        disagreements += res.report.exact_disagreements;
    }
    fs::create_dir_all(out).map_err(data_err)?;
    let n_in = docs.len();
    let survivors: Vec<Document> = docs.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(d, _)| d).collect();
    let n_out = survivors.len();
    write_shard(survivors, &out.join("part"), 1000, false).map_err(data_err)?;
    fs::write(out.join("clusters.tsv"), dump).map_err(data_err)?;
    let mut summary = serde_json::json!({ "docs_in": n_in, "docs_out": n_out, "candidate_pairs": candidates });
    if params.verify_exact {
        summary["exact_disagreements"] = disagreements.into();
    }
    println!("{summary}");
    Ok(())
}

fn print_reports(reports: &[StageReport], json: bool) {
    let (text, rows) = report(reports);
    if json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
    } else {
        print!("{text}");
    }
}

fn split_kv(s: &str) -> Result<(String, PathBuf)> {
    let (k, v) = s.split_once('=').ok_or_else(|| config_err(format!("expected name=path, got `{s}`")))?;
    Ok((k.to_string(), PathBuf::from(v)))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { config, resume } => {
            let mut cfg = PipelineConfig::load(&config)?;
            cfg.apply_env(|k| std::env::var(k).ok())?;
            let reports = refinery::pipeline::run(&cfg, &RunOptions { resume, ..Default::default() })?;
            print_reports(&reports, false);
        }
        Cmd::Extract {
            input,
            out,
            max_docs_per_shard,
            gzip,
        } => {
            let mut docs = Vec::new();
            for p in &input {
                for f in files_in(p)? {
                    let (d, stats) = ingest(&f).map_err(data_err)?;
                    eprintln!("{}: {} documents from {} candidates", f.display(), stats.documents, stats.candidates);
                    docs.extend(d);
                }
            }
            let shards = write_shard(docs, &out, max_docs_per_shard, gzip).map_err(|e| match e {
                refinery::corpus::CorpusError::InvalidArgument(m) => config_err(m),
                e => data_err(e),
            })?;
            for s in shards {
                println!("{}\t{}", s.path.display(), s.count);
            }
        }
        Cmd::LangidTrain { input, out } => {
            let f = fs::File::open(&input).map_err(|e| data_err(format!("cannot read {}: {e}", input.display())))?;
            let labeled = read_labeled(BufReader::new(f)).map_err(data_err)?;
            let model = train_langid(labeled.iter().map(|(l, t)| (*l, t.as_str()))).map_err(data_err)?;
            model.save(&out).map_err(data_err)?;
        }
        Cmd::Filter {
            config,
            mode,
            calibrate_from,
            percentile,
            lang_confidence_min,
            input,
            out,
            print_defaults,
            write_config,
        } => filter_cmd(
            config,
            mode,
            calibrate_from,
            percentile,
            lang_confidence_min,
            input,
            out,
            print_defaults,
            write_config,
        )?,
        Cmd::Dedup {
            input,
            out,
            threshold,
            bands,
            rows,
            perms,
            batch_size,
            seed,
            verify_exact,
        } => {
            let params = DedupParams {
                threshold,
                bands,
                rows,
                seed,
                batch_capacity: batch_size,
                verify_exact,
            };
            dedup_cmd(&input, &out, params, perms)?
        }
        Cmd::TokTrain { train } => {
            let texts = read_texts(&train.input)?;
            let m = train_bpe(&texts, &train.config()).map_err(tok_err)?;
            save_model(&m, &train.out)?;
            println!("vocab {} merges {} alphabet {}", m.vocab_size(), m.merges().len(), m.alphabet().len());
        }
        Cmd::TokCleanTrain {
            train,
            char_filter,
            cleaned_out,
        } => {
            let filter = match &char_filter {
                Some(p) => CharFilter::default().parse_overrides(&read_file(p)?).map_err(config_err)?,
                None => CharFilter::default(),
            };
            let texts = read_texts(&train.input)?;
            let out = clean_train(&texts, &train.config(), &filter).map_err(tok_err)?;
            save_model(&out.model, &train.out)?;
            if let Some(p) = cleaned_out {
                fs::write(p, out.cleaned.join("\n") + "\n").map_err(data_err)?;
            }
            println!(
                "banned pieces {} words {} -> {} vocab {}",
                out.banned_pieces,
                out.words_before,
                out.words_after,
                out.model.vocab_size()
            );
        }
        Cmd::TokEval { model, input, metric } => {
            let m = TokenizerModel::load(&model).map_err(data_err)?;
            let c = evaluate(&m, &read_texts(&input)?).map_err(data_err)?;
            match metric {
                Metric::Ratio => println!("{:.6}", c.token_to_word_ratio()),
                Metric::Exact => println!("{:.6}", c.exact_score()),
            }
        }
        Cmd::TokCompare {
            models,
            evals,
            external,
            json,
        } => {
            let mut loaded = Vec::new();
            for s in &models {
                let (name, p) = split_kv(s)?;
                loaded.push((name, TokenizerModel::load(&p).map_err(data_err)?));
            }
            let mut corpora = BTreeMap::new();
            for s in &evals {
                let (lang, p) = split_kv(s)?;
                corpora.insert(lang, read_texts(&p)?);
            }
            let ext = match &external {
                Some(p) => parse_external_counts(&read_file(p)?).map_err(config_err)?,
                None => Vec::new(),
            };
            let refs: Vec<(String, &TokenizerModel)> = loaded.iter().map(|(n, m)| (n.clone(), m)).collect();
            let rows = compare_tokenizers(&refs, &corpora, &ext).map_err(data_err)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
            } else {
                print!("{}", format_comparison(&rows));
            }
        }
        Cmd::Report { config, json } => {
            let mut cfg = PipelineConfig::load(&config)?;
            cfg.apply_env(|k| std::env::var(k).ok())?;
            let mut reports = Vec::new();
            for s in &cfg.stages {
                let p = cfg.work_dir.join("reports").join(format!("{}.json", s.kind));
                let Ok(b) = fs::read(&p) else { break };
                reports.push(serde_json::from_slice(&b).map_err(data_err)?);
            }
            print_reports(&reports, json);
        }
    }
    Ok(())
}

fn tok_err(e: refinery::tokenizer::TokenizerError) -> Failure {
    use refinery::tokenizer::TokenizerError as T;
    match e {
        T::Config(_) | T::VocabTooSmall { .. } => config_err(e),
        e => data_err(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
