//! Classifier specifications, fitting from a training corpus, and batch
//! prediction from raw documents.

use std::path::PathBuf;

use log::info;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_holdout, Corpus, Document, LabelSet, NUM_TYPES};
use crate::embeddings::{
    build_cooccurrence, load_embedding_text, read_embedding_cache, train_glove, EmbeddingTable, GloveConfig,
    OovPolicy,
};
use crate::error::{Error, Result};
use crate::neural::{train, Example, NetworkParams, TrainConfig, TrainHistory};
use crate::text::{preprocess, to_sequence, IndexSequence, NgramSpace, SparseCountVector, Stopwords, Vocabulary, DEFAULT_MAX_LEN};
use crate::traditional::svm::GridCell;
use crate::traditional::{
    mlknn_train, ovr_svm, per_type_grid_svm, BaselineKind, BaselineModel, KnnModel, MlknnModel, OvrSvm, SvmParams,
};

fn default_ngram() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSpec {
    pub k: usize,
    pub ngram_order: usize,
}

impl Default for KnnSpec {
    fn default() -> Self {
        KnnSpec {
            k: 5,
            ngram_order: default_ngram(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlknnSpec {
    pub k: usize,
    pub smoothing: f64,
    pub ngram_order: usize,
}

impl Default for MlknnSpec {
    fn default() -> Self {
        MlknnSpec {
            k: crate::traditional::mlknn::DEFAULT_K,
            smoothing: crate::traditional::mlknn::DEFAULT_SMOOTHING,
            ngram_order: default_ngram(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSpec {
    pub grid: Vec<f64>,
    pub inner_folds: usize,
    pub max_epochs: usize,
    pub ngram_order: usize,
}

impl Default for SvmSpec {
    fn default() -> Self {
        SvmSpec {
            grid: crate::traditional::svm::DEFAULT_GRID.to_vec(),
            inner_folds: 3,
            max_epochs: SvmParams::default().max_epochs,
            ngram_order: default_ngram(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OvrSvmSpec {
    pub c: f64,
    pub max_epochs: usize,
    pub ngram_order: usize,
}

impl Default for OvrSvmSpec {
    fn default() -> Self {
        OvrSvmSpec {
            c: 1.0,
            max_epochs: SvmParams::default().max_epochs,
            ngram_order: default_ngram(),
        }
    }
}

/// Where the network's word vectors come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSpec {
    /// Seeded random vectors for every word, all trainable.
    Random {
        dim: usize,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// GloVe-format text file.
    File {
        path: PathBuf,
        dim: usize,
        #[serde(default)]
        oov: OovPolicy,
    },
    /// Binary cache written by `embed-train`.
    Cache {
        path: PathBuf,
        #[serde(default)]
        oov: OovPolicy,
    },
    /// GloVe vectors trained on the training split itself.
    Glove {
        dim: usize,
        #[serde(default = "default_window")]
        window: usize,
        #[serde(default = "default_glove_epochs")]
        epochs: usize,
        #[serde(default)]
        oov: OovPolicy,
    },
}

/// Uniform half-width comparable to pre-trained GloVe components.
fn default_scale() -> f64 {
    0.5
}

fn default_window() -> usize {
    10
}

fn default_glove_epochs() -> usize {
    GloveConfig::default().epochs
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        EmbeddingSpec::Random {
            dim: 300,
            scale: default_scale(),
        }
    }
}

impl EmbeddingSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            EmbeddingSpec::Random { dim, .. } | EmbeddingSpec::File { dim, .. } | EmbeddingSpec::Glove { dim, .. } => {
                Some(*dim)
            }
            EmbeddingSpec::Cache { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RnnSpec {
    pub embedding: EmbeddingSpec,
    /// LSTM width; the embedding dimension when absent.
    pub hidden: Option<usize>,
    pub max_len: usize,
    /// Share of the training split held back for epoch selection.
    pub validation_fraction: f64,
    pub train: TrainConfig,
}

impl Default for RnnSpec {
    fn default() -> Self {
        RnnSpec {
            embedding: EmbeddingSpec::default(),
            hidden: None,
            max_len: DEFAULT_MAX_LEN,
            validation_fraction: 0.1,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Mf1,
    Mf2,
    Rand,
    Knn(KnnSpec),
    Mlknn(MlknnSpec),
    /// One grid-searched SVM per type.
    Svm(SvmSpec),
    /// Binary relevance with a single `C`.
    OvrSvm(OvrSvmSpec),
    Rnn(RnnSpec),
}

impl ClassifierSpec {
    /// Report label used when the configuration does not name the model.
    pub fn default_label(&self) -> &'static str {
        match self {
            ClassifierSpec::Mf1 => "MF1",
            ClassifierSpec::Mf2 => "MF2",
            ClassifierSpec::Rand => "RAND",
            ClassifierSpec::Knn(_) => "kNN",
            ClassifierSpec::Mlknn(_) => "MLkNN",
            ClassifierSpec::Svm(_) => "SVM",
            ClassifierSpec::OvrSvm(_) => "OvRSVM",
            ClassifierSpec::Rnn(_) => "RNN",
        }
    }

    /// Every problem with the hyperparameters, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ngram = |order: usize, out: &mut Vec<String>| {
            if !(1..=2).contains(&order) {
                out.push(format!("classifier.ngram_order must be 1 or 2, got {order}"));
            }
        };
        match self {
            ClassifierSpec::Mf1 | ClassifierSpec::Mf2 | ClassifierSpec::Rand => {}
            ClassifierSpec::Knn(s) => {
                ngram(s.ngram_order, &mut out);
                if s.k == 0 {
                    out.push("classifier.k must be at least 1".into());
                }
            }
            ClassifierSpec::Mlknn(s) => {
                ngram(s.ngram_order, &mut out);
                if s.k == 0 {
                    out.push("classifier.k must be at least 1".into());
                }
                if !(s.smoothing > 0.0) {
                    out.push("classifier.smoothing must be positive".into());
                }
            }
            ClassifierSpec::Svm(s) => {
                ngram(s.ngram_order, &mut out);
                if s.grid.is_empty() {
                    out.push("classifier.grid must not be empty".into());
                }
                if s.grid.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
                    out.push("classifier.grid values must be positive".into());
                }
                if s.inner_folds < 2 {
                    out.push("classifier.inner_folds must be at least 2".into());
                }
                if s.max_epochs == 0 {
                    out.push("classifier.max_epochs must be at least 1".into());
                }
            }
            ClassifierSpec::OvrSvm(s) => {
                ngram(s.ngram_order, &mut out);
                if !(s.c > 0.0) || !s.c.is_finite() {
                    out.push("classifier.c must be positive".into());
                }
                if s.max_epochs == 0 {
                    out.push("classifier.max_epochs must be at least 1".into());
                }
            }
            ClassifierSpec::Rnn(s) => {
                if let Err(e) = s.train.validate() {
                    out.push(format!("classifier.train: {e}"));
                }
                if s.max_len == 0 {
                    out.push("classifier.max_len must be at least 1".into());
                }
                if s.hidden == Some(0) {
                    out.push("classifier.hidden must be at least 1".into());
                }
                if !(0.0..1.0).contains(&s.validation_fraction) {
                    out.push("classifier.validation_fraction must lie in [0, 1)".into());
                }
                if s.embedding.dim() == Some(0) {
                    out.push("classifier.embedding.dim must be at least 1".into());
                }
                match &s.embedding {
                    EmbeddingSpec::File { path, .. } | EmbeddingSpec::Cache { path, .. } if !path.is_file() => {
                        out.push(format!("embedding file {} does not exist", path.display()));
                    }
                    _ => {}
                }
            }
        }
        out
    }
}

/// A fitted model together with the text pipeline it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub label: String,
    pub stopwords: Stopwords,
    /// Hash of the training-split vocabulary, checked before evaluation.
    pub vocab_hash: String,
    pub model: TrainedModel,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Baseline(BaselineModel),
    Knn { space: NgramSpace, model: KnnModel },
    Mlknn { space: NgramSpace, model: MlknnModel },
    Svm { space: NgramSpace, model: OvrSvm, grid_searched: bool },
    Rnn { max_len: usize, net: NetworkParams },
}

/// Training by-products worth reporting.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FitSummary {
    /// Per-type grid cells for grid-searched SVMs, in canonical type order.
    pub svm_grid: Option<Vec<Vec<GridCell>>>,
    pub history: Option<TrainHistory>,
}

/// Ranking scores feed threshold-free metrics; probabilities are thresholded.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub ranking: Vec<[f64; NUM_TYPES]>,
    pub probability: Vec<[f64; NUM_TYPES]>,
}

fn tokenize_all(docs: &[Document], stopwords: &Stopwords) -> Vec<Vec<String>> {
    docs.iter().map(|d| preprocess(&d.text, stopwords)).collect()
}

fn ngram_features(train: &Corpus, stopwords: &Stopwords, order: usize) -> Result<(NgramSpace, Vec<SparseCountVector>)> {
    let tokens = tokenize_all(train.documents(), stopwords);
    let space = NgramSpace::build(tokens.iter().map(Vec::as_slice), order)?;
    let x = tokens.iter().map(|t| space.vectorize(t)).collect();
    Ok((space, x))
}

fn labels_of(corpus: &Corpus) -> Vec<LabelSet> {
    corpus.documents().iter().map(|d| d.labels).collect()
}

fn embedding_table(spec: &EmbeddingSpec, vocab: Vocabulary, train_tokens: &[Vec<String>], seed: u64) -> Result<EmbeddingTable> {
    match spec {
        EmbeddingSpec::Random { dim, scale } => EmbeddingTable::random(vocab, *dim, seed, *scale),
        EmbeddingSpec::File { path, dim, oov } => load_embedding_text(path, *dim, vocab, *oov),
        EmbeddingSpec::Cache { path, oov } => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let (words, values, dim) = read_embedding_cache(std::io::BufReader::new(file))?;
            let vectors = words
                .into_iter()
                .enumerate()
                .filter(|(_, w)| vocab.get(w).is_some())
                .map(|(i, w)| (w, values[i * dim..(i + 1) * dim].to_vec()))
                .collect();
            EmbeddingTable::from_vectors(vocab, dim, &vectors, *oov)
        }
        EmbeddingSpec::Glove { dim, window, epochs, oov } => {
            let x = build_cooccurrence(train_tokens, *window)?;
            let cfg = GloveConfig {
                dim: *dim,
                epochs: *epochs,
                seed,
                ..GloveConfig::default()
            };
            let (model, history) = train_glove(&x, &cfg)?;
            info!("GloVe objective after {} epochs: {:?}", epochs, history.last());
            EmbeddingTable::from_vectors(vocab, *dim, &model.word_vector_map(), *oov)
        }
    }
}

/// Fits `spec` on `train`. Vocabulary, feature space and embeddings all come
/// from `train` alone.
pub fn fit(spec: &ClassifierSpec, label: &str, train_corpus: &Corpus, stopwords: &Stopwords, seed: u64) -> Result<(Classifier, FitSummary)> {
    if train_corpus.is_empty() {
        return Err(Error::Degenerate("training corpus is empty".into()));
    }
    let problems = spec.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let labels = labels_of(train_corpus);
    let mut summary = FitSummary::default();
    let model = match spec {
        ClassifierSpec::Mf1 | ClassifierSpec::Mf2 | ClassifierSpec::Rand => {
            let kind = match spec {
                ClassifierSpec::Mf1 => BaselineKind::Mf1,
                ClassifierSpec::Mf2 => BaselineKind::Mf2,
                _ => BaselineKind::Rand,
            };
            TrainedModel::Baseline(BaselineModel::fit(kind, &labels, seed))
        }
        ClassifierSpec::Knn(s) => {
            let (space, x) = ngram_features(train_corpus, stopwords, s.ngram_order)?;
            let k = s.k.min(x.len());
            TrainedModel::Knn {
                space,
                model: KnnModel::new(x, labels, k)?,
            }
        }
        ClassifierSpec::Mlknn(s) => {
            let (space, x) = ngram_features(train_corpus, stopwords, s.ngram_order)?;
            TrainedModel::Mlknn {
                space,
                model: mlknn_train(x, labels, s.k, s.smoothing)?,
            }
        }
        ClassifierSpec::Svm(s) => {
            let (space, x) = ngram_features(train_corpus, stopwords, s.ngram_order)?;
            let base = SvmParams {
                max_epochs: s.max_epochs,
                seed,
                ..SvmParams::default()
            };
            let inner = s.inner_folds.min(x.len());
            let (model, cells) = per_type_grid_svm(&x, &labels, space.dim(), &s.grid, inner, &base)?;
            summary.svm_grid = Some(cells);
            TrainedModel::Svm {
                space,
                model,
                grid_searched: true,
            }
        }
        ClassifierSpec::OvrSvm(s) => {
            let (space, x) = ngram_features(train_corpus, stopwords, s.ngram_order)?;
            let params = SvmParams {
                c: s.c,
                max_epochs: s.max_epochs,
                seed,
                ..SvmParams::default()
            };
            let model = ovr_svm(&x, &labels, space.dim(), &params)?;
            TrainedModel::Svm {
                space,
                model,
                grid_searched: false,
            }
        }
        ClassifierSpec::Rnn(s) => {
            let tokens = tokenize_all(train_corpus.documents(), stopwords);
            let vocab = Vocabulary::build(train_corpus, stopwords);
            let table = embedding_table(&s.embedding, vocab, &tokens, seed)?;
            let hidden = s.hidden.unwrap_or(table.dim());
            let mut cfg = s.train.clone();
            cfg.seed = seed;
            let (fit_part, valid_part) = if s.validation_fraction > 0.0 && train_corpus.len() >= 2 {
                split_holdout(train_corpus, s.validation_fraction, seed)?
            } else {
                (train_corpus.clone(), train_corpus.subset("validation", &[], train_corpus.role()))
            };
            let examples = |c: &Corpus| -> Vec<Example> {
                c.documents()
                    .iter()
                    .map(|d| (to_sequence(&preprocess(&d.text, stopwords), table.vocab(), s.max_len), d.labels))
                    .collect()
            };
            let (fit_examples, valid_examples) = (examples(&fit_part), examples(&valid_part));
            let net = NetworkParams::new(table, hidden, cfg.dropout_rate, seed)?;
            let (net, history) = train(net, &fit_examples, &valid_examples, &cfg)?;
            summary.history = Some(history);
            TrainedModel::Rnn { max_len: s.max_len, net }
        }
    };
    Ok((
        Classifier {
            label: label.to_string(),
            stopwords: stopwords.clone(),
            vocab_hash: Vocabulary::build(train_corpus, stopwords).hash_hex(),
            model,
        },
        summary,
    ))
}

impl Classifier {
    pub fn kind_name(&self) -> &'static str {
        match &self.model {
            TrainedModel::Baseline(b) => b.kind().name(),
            TrainedModel::Knn { .. } => "kNN",
            TrainedModel::Mlknn { .. } => "MLkNN",
            TrainedModel::Svm { grid_searched: true, .. } => "SVM",
            TrainedModel::Svm { grid_searched: false, .. } => "OvRSVM",
            TrainedModel::Rnn { .. } => "RNN",
        }
    }

    /// Hash of the feature space (n-gram features or vocabulary) the model
    /// reads; empty for baselines, which read no features.
    pub fn feature_hash(&self) -> String {
        match &self.model {
            TrainedModel::Baseline(_) => String::new(),
            TrainedModel::Knn { space, .. } | TrainedModel::Mlknn { space, .. } | TrainedModel::Svm { space, .. } => {
                space.hash_hex()
            }
            TrainedModel::Rnn { net, .. } => net.embedding.vocab().hash_hex(),
        }
    }

    pub fn sequence(&self, text: &str) -> Option<IndexSequence> {
        match &self.model {
            TrainedModel::Rnn { max_len, net } => {
                Some(to_sequence(&preprocess(text, &self.stopwords), net.embedding.vocab(), *max_len))
            }
            _ => None,
        }
    }

    pub fn predict_texts(&self, texts: &[&str]) -> Result<Predictions> {
        use rayon::prelude::*;
        let vectorize = |space: &NgramSpace| -> Vec<SparseCountVector> {
            texts
                .par_iter()
                .map(|t| space.vectorize(&preprocess(t, &self.stopwords)))
                .collect()
        };
        let same = |v: Vec<[f64; NUM_TYPES]>| Predictions {
            ranking: v.clone(),
            probability: v,
        };
        Ok(match &self.model {
            TrainedModel::Baseline(b) => same(texts.iter().map(|t| b.predict(t)).collect()),
            TrainedModel::Knn { space, model } => same(model.predict_batch(&vectorize(space))),
            TrainedModel::Mlknn { space, model } => same(model.predict_batch(&vectorize(space))),
            TrainedModel::Svm { space, model, .. } => {
                let x = vectorize(space);
                let ranking = x.par_iter().map(|xi| model.ranking_scores(xi)).collect();
                let probability = x.par_iter().map(|xi| model.predict_proba(xi)).collect::<Result<_>>()?;
                Predictions { ranking, probability }
            }
            TrainedModel::Rnn { .. } => {
                let out = texts
                    .par_iter()
                    .map(|t| match &self.model {
                        TrainedModel::Rnn { net, .. } => net.predict(&self.sequence(t).expect("rnn model")),
                        _ => unreachable!(),
                    })
                    .collect::<Result<Vec<_>>>()?;
                same(out)
            }
        })
    }

    pub fn predict(&self, docs: &[Document]) -> Result<Predictions> {
        let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
        self.predict_texts(&texts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::KnowledgeType;

    fn corpus() -> Corpus {
        let docs = (0..24)
            .map(|i| {
                let t = KnowledgeType::ALL[i % 3];
                let text = format!("marker{} shared words here {}", i % 3, i);
                Document::new(format!("d{i}"), "E", text, [t].into_iter().collect())
            })
            .collect();
        Corpus::new("toy", docs).unwrap()
    }

    #[test]
    fn every_kind_fits_and_predicts_in_range() {
        let c = corpus();
        let rnn = RnnSpec {
            embedding: EmbeddingSpec::Random { dim: 4, scale: 0.1 },
            train: TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
            ..RnnSpec::default()
        };
        let specs = [
            ClassifierSpec::Mf1,
            ClassifierSpec::Mf2,
            ClassifierSpec::Rand,
            ClassifierSpec::Knn(KnnSpec::default()),
            ClassifierSpec::Mlknn(MlknnSpec::default()),
            ClassifierSpec::Svm(SvmSpec {
                grid: vec![0.1, 1.0],
                ..SvmSpec::default()
            }),
            ClassifierSpec::OvrSvm(OvrSvmSpec::default()),
            ClassifierSpec::Rnn(rnn),
        ];
        for spec in specs {
            let (clf, _) = fit(&spec, spec.default_label(), &c, &Stopwords::english(), 1).unwrap();
            assert_eq!(clf.kind_name(), spec.default_label());
            let p = clf.predict(c.documents()).unwrap();
            assert_eq!(p.ranking.len(), c.len());
            for row in p.ranking.iter().chain(&p.probability) {
                assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn svm_ranks_marker_label_first() {
        let c = corpus();
        let (clf, summary) = fit(&ClassifierSpec::Svm(SvmSpec::default()), "SVM", &c, &Stopwords::english(), 0).unwrap();
        assert_eq!(summary.svm_grid.as_ref().unwrap().len(), NUM_TYPES);
        let p = clf.predict_texts(&["marker1 something"]).unwrap();
        let best = (0..NUM_TYPES).max_by(|&a, &b| p.ranking[0][a].total_cmp(&p.ranking[0][b])).unwrap();
        assert_eq!(best, 1);
    }

    #[test]
    fn bad_hyperparameters_are_listed() {
        let spec = ClassifierSpec::Svm(SvmSpec {
            grid: vec![],
            inner_folds: 1,
            ngram_order: 3,
            ..SvmSpec::default()
        });
        assert_eq!(spec.problems().len(), 3);
        assert!(matches!(fit(&spec, "x", &corpus(), &Stopwords::none(), 0), Err(Error::Config(_))));
    }
}
