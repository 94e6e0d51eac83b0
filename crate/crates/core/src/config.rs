//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ClassifierSpec, EmbeddingSpec, RnnSpec};
use crate::text::Stopwords;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    /// Labeled corpus, JSONL or CSV.
    pub train: PathBuf,
    /// Optional corpus from another API, used only for testing.
    #[serde(default)]
    pub second_test: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Mandatory; validation reports its absence.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Report label; defaults to the classifier kind's label.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Resample the training split (never the test split).
    #[serde(default)]
    pub resample: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// `english`, `none`, or a path to a stopword file.
    #[serde(default = "default_stopwords")]
    pub stopwords: String,
    pub corpus: CorpusConfig,
    #[serde(default = "default_classifier")]
    pub classifier: ClassifierSpec,
}

fn default_folds() -> usize {
    10
}

fn default_test_fraction() -> f64 {
    0.1
}

fn default_threshold() -> f64 {
    crate::eval::metrics::DEFAULT_THRESHOLD
}

fn default_stopwords() -> String {
    "english".to_string()
}

fn default_classifier() -> ClassifierSpec {
    ClassifierSpec::Rnn(RnnSpec::default())
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim().to_string()]))
    }

    /// Reads, resolves relative paths against the file's directory, and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read config {}: {e}", path.display())]))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.corpus.train);
        if let Some(p) = self.corpus.second_test.as_mut() {
            resolve(base, p);
        }
        if !matches!(self.stopwords.as_str(), "english" | "none") {
            let mut p = PathBuf::from(&self.stopwords);
            resolve(base, &mut p);
            self.stopwords = p.to_string_lossy().into_owned();
        }
        if let ClassifierSpec::Rnn(r) = &mut self.classifier {
            if let EmbeddingSpec::File { path, .. } | EmbeddingSpec::Cache { path, .. } = &mut r.embedding {
                resolve(base, path);
            }
        }
    }

    /// Every validation failure at once.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.seed.is_none() {
            out.push("seed is required".to_string());
        }
        if self.folds < 2 {
            out.push(format!("folds must be at least 2, got {}", self.folds));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            out.push(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if !self.threshold.is_finite() {
            out.push("threshold must be finite".to_string());
        }
        if !self.corpus.train.is_file() {
            out.push(format!("corpus file {} does not exist", self.corpus.train.display()));
        }
        if let Some(p) = &self.corpus.second_test {
            if !p.is_file() {
                out.push(format!("second test corpus {} does not exist", p.display()));
            }
        }
        if !matches!(self.stopwords.as_str(), "english" | "none") && !Path::new(&self.stopwords).is_file() {
            out.push(format!("stopword file {} does not exist", self.stopwords));
        }
        out.extend(self.classifier.problems());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.classifier.default_label().to_string())
    }

    pub fn stopwords(&self) -> Result<Stopwords> {
        match self.stopwords.as_str() {
            "english" => Ok(Stopwords::english()),
            "none" => Ok(Stopwords::none()),
            path => Stopwords::load(Path::new(path)),
        }
    }

    /// SHA-256 of the configuration as JSON with sorted keys, so reordering
    /// keys in the file does not change it.
    pub fn hash_hex(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
