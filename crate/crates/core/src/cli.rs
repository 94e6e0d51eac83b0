//! Command implementations behind the `knowtype` binary.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::corpus::{
    load_corpus, load_corpus_with, resample_training_set, scumble, split_holdout, write_jsonl, Corpus, CorpusFormat,
    Document, KnowledgeType, LabelSet, LoadOptions,
};
use crate::embeddings::{build_cooccurrence, train_glove, write_embedding_cache, write_embedding_text, GloveConfig};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, evaluate_predictions, markdown_tables, write_csv, CvOptions, EvalReport};
use crate::model::{fit, ClassifierSpec, EmbeddingSpec, FitSummary};
use crate::persist::{load_classifier, save_classifier};
use crate::text::{preprocess, NgramSpace, Stopwords, Vocabulary};

#[derive(Debug, Parser)]
#[command(name = "knowtype", version, about = "Classify API reference documentation by knowledge type")]
pub struct Cli {
    /// Override the configuration's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Single-threaded numerics and timestamp-free manifests, for
    /// byte-identical re-runs.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split, optionally resample, and cache the vocabulary.
    Prepare(RunArgs),
    /// Fit the configured classifier on the prepared training split.
    Train(RunArgs),
    /// Score one or more models on the prepared test split.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Model files; defaults to `<out>/model.bin`.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// k-fold cross-validation on the whole corpus.
    Cv {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Tag unseen documents with knowledge types.
    Tag {
        #[arg(long)]
        model: PathBuf,
        /// JSONL or CSV corpus, or plain text with blank-line separated documents.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = crate::eval::metrics::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Output JSONL file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train GloVe vectors on a text corpus.
    EmbedTrain {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        dim: usize,
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = 25)]
        epochs: usize,
    },
}

pub const MANIFEST: &str = "manifest.json";
pub const MODEL: &str = "model.bin";
pub const HISTORY: &str = "history.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";
const PREPARED: &str = "prepared";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    /// Latest record of each command run in this directory.
    pub commands: BTreeMap<String, CommandRecord>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub deterministic: bool,
    /// Unix seconds; absent in deterministic mode.
    pub started_at: Option<u64>,
    pub stages: Vec<StageRecord>,
    /// Output file (relative to the run directory) to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub details: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// Wall-clock seconds; absent in deterministic mode.
    pub seconds: Option<f64>,
}

struct Recorder {
    out: PathBuf,
    deterministic: bool,
    record: CommandRecord,
}

impl Recorder {
    fn new(out: &Path, deterministic: bool, cfg: Option<&ExperimentConfig>) -> Self {
        let started_at = (!deterministic).then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or_default()
        });
        Recorder {
            out: out.to_path_buf(),
            deterministic,
            record: CommandRecord {
                config_hash: cfg.map(ExperimentConfig::hash_hex),
                seed: cfg.map(ExperimentConfig::seed),
                deterministic,
                started_at,
                details: json!({}),
                ..Default::default()
            },
        }
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let value = f()?;
        let seconds = (!self.deterministic).then(|| start.elapsed().as_secs_f64());
        info!("stage {name} done");
        self.record.stages.push(StageRecord {
            name: name.to_string(),
            seconds,
        });
        Ok(value)
    }

    fn detail(&mut self, key: &str, value: serde_json::Value) {
        if let serde_json::Value::Object(map) = &mut self.record.details {
            map.insert(key.to_string(), value);
        }
    }

    fn output(&mut self, rel: &str) -> Result<()> {
        let path = self.out.join(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.record.outputs.insert(rel.to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    fn finish(self, command: &str) -> Result<()> {
        let path = self.out.join(MANIFEST);
        let mut manifest = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_default(),
            Err(_) => RunManifest::default(),
        };
        manifest.artifact = env!("CARGO_PKG_NAME").to_string();
        manifest.version = env!("CARGO_PKG_VERSION").to_string();
        manifest.commands.insert(command.to_string(), self.record);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Resolves symlinks on the longest existing prefix, so paths that are not
/// created yet compare correctly.
fn resolve(path: &Path) -> PathBuf {
    let abs = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
    let mut existing = abs.as_path();
    let mut rest = Vec::new();
    while !existing.exists() {
        match (existing.parent(), existing.file_name()) {
            (Some(parent), Some(name)) => {
                rest.push(name.to_os_string());
                existing = parent;
            }
            _ => return abs,
        }
    }
    let mut out = existing.canonicalize().unwrap_or_else(|_| existing.to_path_buf());
    out.extend(rest.iter().rev());
    out
}

/// Refuses to write inside a directory that holds one of the inputs.
fn guard_output(out: &Path, inputs: &[&Path]) -> Result<()> {
    let out = resolve(out);
    for input in inputs {
        let Some(parent) = resolve(input).parent().map(Path::to_path_buf) else {
            continue;
        };
        if out.starts_with(&parent) {
            return Err(Error::Config(vec![format!(
                "output directory {} holds input {}; choose a separate directory",
                out.display(),
                input.display()
            )]));
        }
    }
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_inputs(cfg: &ExperimentConfig) -> Vec<&Path> {
    let mut v = vec![cfg.corpus.train.as_path()];
    if let Some(p) = &cfg.corpus.second_test {
        v.push(p);
    }
    if let ClassifierSpec::Rnn(r) = &cfg.classifier {
        if let EmbeddingSpec::File { path, .. } | EmbeddingSpec::Cache { path, .. } = &r.embedding {
            v.push(path);
        }
    }
    v
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn load_any(path: &Path) -> Result<Corpus> {
    load_corpus(path, CorpusFormat::from_path(path))
}

fn counts_json(c: &Corpus) -> serde_json::Value {
    let map: serde_json::Map<String, serde_json::Value> = KnowledgeType::ALL
        .iter()
        .map(|t| (t.name().to_string(), json!(c.label_counts()[t.index()])))
        .collect();
    serde_json::Value::Object(map)
}

fn ngram_order(spec: &ClassifierSpec) -> Option<usize> {
    match spec {
        ClassifierSpec::Knn(s) => Some(s.ngram_order),
        ClassifierSpec::Mlknn(s) => Some(s.ngram_order),
        ClassifierSpec::Svm(s) => Some(s.ngram_order),
        ClassifierSpec::OvrSvm(s) => Some(s.ngram_order),
        _ => None,
    }
}

pub fn cmd_prepare(cfg: &ExperimentConfig, out: &Path, deterministic: bool) -> Result<()> {
    guard_output(out, &config_inputs(cfg))?;
    create_dir(&out.join(PREPARED))?;
    let mut rec = Recorder::new(out, deterministic, Some(cfg));
    let seed = cfg.seed();
    let corpus = rec.stage("load", || load_any(&cfg.corpus.train))?;
    let (train, test) = rec.stage("split", || split_holdout(&corpus, cfg.test_fraction, seed))?;
    rec.detail("corpus_size", json!(corpus.len()));
    rec.detail("test_size", json!(test.len()));
    rec.detail("train_size_before_resampling", json!(train.len()));
    rec.detail("train_label_counts_before_resampling", counts_json(&train));
    rec.detail("train_scumble_before_resampling", json!(scumble(&train)?.mean));
    let train = if cfg.resample {
        let resampled = rec.stage("resample", || resample_training_set(&train, seed))?;
        rec.detail("train_size_after_resampling", json!(resampled.len()));
        rec.detail("train_label_counts_after_resampling", counts_json(&resampled));
        rec.detail("train_scumble_after_resampling", json!(scumble(&resampled)?.mean));
        resampled
    } else {
        train
    };
    let stopwords = cfg.stopwords()?;
    let vocab = rec.stage("vocabulary", || Ok(Vocabulary::build(&train, &stopwords)))?;
    rec.detail("vocabulary_size", json!(vocab.size()));
    rec.detail("vocabulary_hash", json!(vocab.hash_hex()));

    let dir = out.join(PREPARED);
    write_file(&dir.join("train.jsonl"), |w| write_jsonl(w, train.documents()))?;
    write_file(&dir.join("test.jsonl"), |w| write_jsonl(w, test.documents()))?;
    write_file(&dir.join("vocab.txt"), |w| {
        vocab.tokens().iter().try_for_each(|t| writeln!(w, "{t}"))
    })?;
    let mut outputs = vec!["prepared/train.jsonl", "prepared/test.jsonl", "prepared/vocab.txt"];
    if let Some(order) = ngram_order(&cfg.classifier) {
        let space = rec.stage("features", || {
            let tokens: Vec<Vec<String>> = train.documents().iter().map(|d| preprocess(&d.text, &stopwords)).collect();
            NgramSpace::build(tokens.iter().map(Vec::as_slice), order)
        })?;
        rec.detail("feature_space_size", json!(space.dim()));
        write_file(&dir.join("features.txt"), |w| {
            space.features().iter().try_for_each(|f| writeln!(w, "{f}"))
        })?;
        outputs.push("prepared/features.txt");
    }
    for o in outputs {
        rec.output(o)?;
    }
    rec.finish("prepare")
}

fn read_prepared(out: &Path, name: &str) -> Result<Corpus> {
    let path = out.join(PREPARED).join(name);
    if !path.is_file() {
        return Err(Error::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "run `prepare` first"),
        ));
    }
    load_corpus(&path, CorpusFormat::Jsonl)
}

fn write_history(path: &Path, summary: &FitSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<[String; 3]> = Vec::new();
    if let Some(h) = &summary.history {
        for e in &h.epochs {
            rows.push([e.epoch.to_string(), "train_loss".into(), format!("{:.9}", e.train_loss)]);
            if let Some(a) = e.valid_macro_auc {
                rows.push([e.epoch.to_string(), "valid_macro_auc".into(), format!("{a:.9}")]);
            }
        }
    }
    if let Some(grid) = &summary.svm_grid {
        for (t, cells) in KnowledgeType::ALL.iter().zip(grid) {
            for c in cells {
                let value = c.mean_auprc.map_or_else(String::new, |v| format!("{v:.9}"));
                rows.push([format!("{}:C={}", t.name(), c.c), "inner_auprc".into(), value]);
            }
        }
    }
    let err = |e: csv::Error| Error::InvalidArgument(format!("{}: {e}", path.display()));
    w.write_record(["step", "metric", "value"]).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, deterministic: bool) -> Result<()> {
    guard_output(out, &config_inputs(cfg))?;
    let mut rec = Recorder::new(out, deterministic, Some(cfg));
    let train = rec.stage("load", || read_prepared(out, "train.jsonl"))?;
    let stopwords = cfg.stopwords()?;
    let label = cfg.label();
    let (clf, summary) = rec.stage("fit", || fit(&cfg.classifier, &label, &train, &stopwords, cfg.seed()))?;
    rec.detail("model", json!(label));
    rec.detail("kind", json!(clf.kind_name()));
    rec.detail("train_size", json!(train.len()));
    rec.detail("vocabulary_hash", json!(clf.vocab_hash));
    rec.detail("feature_hash", json!(clf.feature_hash()));
    if let Some(grid) = &summary.svm_grid {
        let chosen: serde_json::Map<String, serde_json::Value> = KnowledgeType::ALL
            .iter()
            .zip(grid)
            .map(|(t, cells)| {
                let best = match &clf.model {
                    crate::model::TrainedModel::Svm { model, .. } => match model.model(*t) {
                        crate::traditional::TypeModel::Svm(m) => json!(m.c),
                        crate::traditional::TypeModel::Constant(_) => serde_json::Value::Null,
                    },
                    _ => serde_json::Value::Null,
                };
                (t.name().to_string(), json!({ "chosen_c": best, "cells": cells }))
            })
            .collect();
        rec.detail("svm_grid", serde_json::Value::Object(chosen));
    }
    if let Some(h) = &summary.history {
        rec.detail("best_epoch", json!(h.best_epoch));
        rec.detail("epochs_run", json!(h.epochs.len()));
    }
    rec.stage("save", || save_classifier(&out.join(MODEL), &clf))?;
    write_history(&out.join(HISTORY), &summary)?;
    rec.output(MODEL)?;
    rec.output(HISTORY)?;
    rec.finish("train")
}

fn truth_of(c: &Corpus) -> Vec<LabelSet> {
    c.documents().iter().map(|d| d.labels).collect()
}

fn write_reports(out: &Path, groups: &[Vec<EvalReport>], rec: &mut Recorder) -> Result<()> {
    let csv_path = out.join(REPORT_CSV);
    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_csv(BufWriter::new(file), groups)?;
    let md_path = out.join(REPORT_MD);
    let md = format!("# Evaluation report\n\n{}", markdown_tables(groups));
    fs::write(&md_path, md).map_err(|e| Error::io(&md_path, e))?;
    rec.output(REPORT_CSV)?;
    rec.output(REPORT_MD)
}

pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    out: &Path,
    models: &[PathBuf],
    threshold: Option<f64>,
    deterministic: bool,
) -> Result<()> {
    guard_output(out, &config_inputs(cfg))?;
    let mut rec = Recorder::new(out, deterministic, Some(cfg));
    let threshold = threshold.unwrap_or(cfg.threshold);
    let test = rec.stage("load", || read_prepared(out, "test.jsonl"))?;
    let vocab_path = out.join(PREPARED).join("vocab.txt");
    let vocab_text = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let prepared_hash = Vocabulary::from_tokens(vocab_text.lines()).hash_hex();
    let second = cfg.corpus.second_test.as_deref().map(load_any).transpose()?;

    let default_model = [out.join(MODEL)];
    let models = if models.is_empty() { &default_model[..] } else { models };
    let mut groups = Vec::new();
    let mut second_groups = Vec::new();
    for path in models {
        let clf = load_classifier(path)?;
        if clf.vocab_hash != prepared_hash {
            return Err(Error::Mismatch(format!(
                "model {} was trained on a different vocabulary than {}",
                path.display(),
                vocab_path.display()
            )));
        }
        let p = rec.stage(&format!("predict:{}", clf.label), || clf.predict(test.documents()))?;
        groups.push(vec![evaluate_predictions(&clf.label, "test", None, &p, &truth_of(&test), threshold)?]);
        if let Some(second) = &second {
            let p = rec.stage(&format!("predict-second:{}", clf.label), || clf.predict(second.documents()))?;
            second_groups.push(vec![evaluate_predictions(
                &clf.label,
                second.name(),
                None,
                &p,
                &truth_of(second),
                threshold,
            )?]);
        }
    }
    groups.extend(second_groups);
    rec.detail("threshold", json!(threshold));
    rec.detail("test_size", json!(test.len()));
    rec.detail("reports", serde_json::to_value(&groups).expect("reports serialize"));
    write_reports(out, &groups, &mut rec)?;
    rec.finish("evaluate")
}

pub fn cmd_cv(cfg: &ExperimentConfig, out: &Path, threshold: Option<f64>, deterministic: bool) -> Result<()> {
    guard_output(out, &config_inputs(cfg))?;
    create_dir(out)?;
    let mut rec = Recorder::new(out, deterministic, Some(cfg));
    let corpus = rec.stage("load", || load_any(&cfg.corpus.train))?;
    let opts = CvOptions {
        folds: cfg.folds,
        resample: cfg.resample,
        seed: cfg.seed(),
        threshold: threshold.unwrap_or(cfg.threshold),
    };
    let stopwords = cfg.stopwords()?;
    let result = rec.stage("cross-validate", || {
        cross_validate(&cfg.classifier, &cfg.label(), &corpus, &stopwords, &opts)
    })?;
    rec.detail("folds", json!(opts.folds));
    rec.detail("skipped_folds", json!(result.skipped));
    rec.detail("summary", serde_json::to_value(&result.summary).expect("summary serializes"));
    write_reports(out, &[result.folds], &mut rec)?;
    rec.finish("cv")
}

#[derive(Serialize)]
struct TypeScore {
    #[serde(rename = "type")]
    kind: &'static str,
    probability: f64,
}

#[derive(Serialize)]
struct TaggedDocument<'a> {
    id: &'a str,
    element: &'a str,
    text: &'a str,
    /// Types at or above the threshold.
    labels: Vec<&'static str>,
    /// Every type, most probable first.
    scores: Vec<TypeScore>,
}

fn read_tag_input(path: &Path) -> Result<Vec<Document>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if matches!(ext.as_str(), "jsonl" | "json" | "csv") {
        let corpus = load_corpus_with(path, CorpusFormat::from_path(path), LoadOptions { labeled: false })?;
        return Ok(corpus.into_documents());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut flush = |current: &mut Vec<&str>| {
        if !current.is_empty() {
            let id = format!("p{}", docs.len() + 1);
            docs.push(Document::new(id, "", current.join("\n"), LabelSet::EMPTY));
            current.clear();
        }
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut current);
        } else {
            current.push(line);
        }
    }
    flush(&mut current);
    Ok(docs)
}

pub fn cmd_tag(model: &Path, input: &Path, threshold: f64, out: Option<&Path>) -> Result<()> {
    let docs = read_tag_input(input)?;
    if docs.is_empty() {
        return Err(Error::InvalidArgument(format!("no documents in {}", input.display())));
    }
    if let Some(o) = out {
        if let Some(parent) = o.parent().filter(|p| !p.as_os_str().is_empty()) {
            guard_output(parent, &[input])?;
            create_dir(parent)?;
        }
    }
    let clf = load_classifier(model)?;
    let p = clf.predict(&docs)?;
    let mut buf = Vec::new();
    for (d, probs) in docs.iter().zip(&p.probability) {
        let mut scores: Vec<TypeScore> = KnowledgeType::ALL
            .iter()
            .map(|t| TypeScore {
                kind: t.name(),
                probability: probs[t.index()],
            })
            .collect();
        scores.sort_by(|a, b| b.probability.total_cmp(&a.probability));
        let labels = KnowledgeType::ALL
            .iter()
            .filter(|t| probs[t.index()] >= threshold)
            .map(|t| t.name())
            .collect();
        let record = TaggedDocument {
            id: &d.id,
            element: &d.element_name,
            text: &d.text,
            labels,
            scores,
        };
        serde_json::to_writer(&mut buf, &record).expect("record serializes");
        buf.push(b'\n');
    }
    match out {
        Some(path) => fs::write(path, &buf).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn read_text_documents(path: &Path) -> Result<Vec<String>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if matches!(ext.as_str(), "jsonl" | "json" | "csv") {
        let corpus = load_corpus_with(path, CorpusFormat::from_path(path), LoadOptions { labeled: false })?;
        return Ok(corpus.into_documents().into_iter().map(|d| d.text).collect());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect())
}

pub const EMBEDDINGS_TEXT: &str = "embeddings.txt";
pub const EMBEDDINGS_CACHE: &str = "embeddings.emb";
pub const GLOVE_LOSS: &str = "glove_loss.csv";

pub fn cmd_embed_train(
    input: &Path,
    out: &Path,
    cfg: &GloveConfig,
    window: usize,
    deterministic: bool,
) -> Result<()> {
    guard_output(out, &[input])?;
    create_dir(out)?;
    let mut rec = Recorder::new(out, deterministic, None);
    rec.record.seed = Some(cfg.seed);
    let docs = rec.stage("load", || read_text_documents(input))?;
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| preprocess(d, &Stopwords::none())).collect();
    if tokens.iter().all(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!("no tokens in {}", input.display())));
    }
    let x = rec.stage("cooccurrence", || build_cooccurrence(&tokens, window))?;
    let (model, history) = rec.stage("glove", || train_glove(&x, cfg))?;
    let words = model.vocab().tokens().to_vec();
    let vectors = model.averaged_vectors();
    write_embedding_text(&out.join(EMBEDDINGS_TEXT), &words, &vectors, cfg.dim)?;
    write_file(&out.join(EMBEDDINGS_CACHE), |w| write_embedding_cache(w, &words, &vectors, cfg.dim))?;
    write_file(&out.join(GLOVE_LOSS), |w| {
        writeln!(w, "epoch,objective")?;
        history
            .iter()
            .enumerate()
            .try_for_each(|(i, v)| writeln!(w, "{},{v:.9}", i + 1))
    })?;
    rec.detail("vocabulary_size", json!(words.len()));
    rec.detail("dim", json!(cfg.dim));
    rec.detail("window", json!(window));
    rec.detail("epochs", json!(cfg.epochs));
    rec.detail("final_objective", json!(history.last()));
    for o in [EMBEDDINGS_TEXT, EMBEDDINGS_CACHE, GLOVE_LOSS] {
        rec.output(o)?;
    }
    rec.finish("embed-train")
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let det = cli.deterministic;
    match cli.command {
        Command::Prepare(a) => cmd_prepare(&load_config(&a.config, cli.seed)?, &a.out, det),
        Command::Train(a) => cmd_train(&load_config(&a.config, cli.seed)?, &a.out, det),
        Command::Evaluate { run, models, threshold } => {
            cmd_evaluate(&load_config(&run.config, cli.seed)?, &run.out, &models, threshold, det)
        }
        Command::Cv { run, threshold } => cmd_cv(&load_config(&run.config, cli.seed)?, &run.out, threshold, det),
        Command::Tag {
            model,
            input,
            threshold,
            out,
        } => cmd_tag(&model, &input, threshold, out.as_deref()),
        Command::EmbedTrain {
            input,
            out,
            dim,
            window,
            epochs,
        } => {
            let cfg = GloveConfig {
                dim,
                epochs,
                seed: cli.seed.unwrap_or_default(),
                ..GloveConfig::default()
            };
            cmd_embed_train(&input, &out, &cfg, window, det)
        }
    }
}
