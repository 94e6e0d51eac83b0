use log::{info, warn};

use crate::corpus::{make_folds, resample_training_set, Corpus, LabelSet};
use crate::error::{Error, Result};
use crate::model::{fit, ClassifierSpec};
use crate::text::Stopwords;

use super::report::{evaluate_predictions, summarize, EvalReport, MeanStd};

#[derive(Clone, Debug)]
pub struct CvOptions {
    pub folds: usize,
    pub resample: bool,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 10,
            resample: false,
            seed: 0,
            threshold: super::metrics::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CvResult {
    pub folds: Vec<EvalReport>,
    pub summary: Vec<(String, Option<MeanStd>)>,
    /// Folds skipped because the training part could not support the model.
    pub skipped: Vec<usize>,
}

/// k-fold cross-validation. Each fold optionally resamples its training
/// part, fits every preprocessing step on that part alone, and scores the
/// untouched test part.
pub fn cross_validate(
    spec: &ClassifierSpec,
    label: &str,
    corpus: &Corpus,
    stopwords: &Stopwords,
    opts: &CvOptions,
) -> Result<CvResult> {
    let folds = make_folds(corpus, opts.folds, opts.seed)?;
    let mut reports = Vec::with_capacity(folds.len());
    let mut skipped = Vec::new();
    for (f, (train, test)) in folds.into_iter().enumerate() {
        let fold_seed = opts.seed.wrapping_add(f as u64);
        let train = if opts.resample {
            resample_training_set(&train, fold_seed)?
        } else {
            train
        };
        let clf = match fit(spec, label, &train, stopwords, fold_seed) {
            Ok((clf, _)) => clf,
            Err(e @ Error::Degenerate(_)) => {
                warn!("fold {f}: skipped ({e})");
                skipped.push(f);
                continue;
            }
            Err(e) => return Err(e),
        };
        let predictions = clf.predict(test.documents())?;
        let truth: Vec<LabelSet> = test.documents().iter().map(|d| d.labels).collect();
        let report = evaluate_predictions(label, corpus.name(), Some(f), &predictions, &truth, opts.threshold)?;
        info!("fold {f}: MacroAUC {:?}, Hamming loss {:.4}", report.macro_auc, report.hamming_loss);
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Error::Degenerate("every cross-validation fold was skipped".into()));
    }
    let summary = summarize(&reports);
    Ok(CvResult {
        folds: reports,
        summary,
        skipped,
    })
}
