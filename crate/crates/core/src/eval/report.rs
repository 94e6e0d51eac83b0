use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::corpus::{KnowledgeType, LabelSet, NUM_TYPES};
use crate::error::Result;
use crate::model::Predictions;

use super::metrics::{auprc, hamming_loss, macro_metrics, subset_accuracy, PredictionMatrix};

/// Multi-label metric rows, in report order.
pub const MULTI_LABEL_METRICS: [&str; 6] = [
    "hamming_loss",
    "subset_accuracy",
    "macro_precision",
    "macro_recall",
    "macro_f1",
    "macro_auc",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub corpus: String,
    /// Fold index, `None` for a single hold-out evaluation.
    pub fold: Option<usize>,
    pub threshold: f64,
    /// `None` where the evaluated documents hold no positive for the type.
    pub auprc: [Option<f64>; NUM_TYPES],
    pub hamming_loss: f64,
    pub subset_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_auc: Option<f64>,
    /// Types left out of MacroAUC because they had a single class.
    pub auc_excluded: Vec<KnowledgeType>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "hamming_loss" => Some(self.hamming_loss),
            "subset_accuracy" => Some(self.subset_accuracy),
            "macro_precision" => Some(self.macro_precision),
            "macro_recall" => Some(self.macro_recall),
            "macro_f1" => Some(self.macro_f1),
            "macro_auc" => self.macro_auc,
            _ => None,
        }
    }

    /// `(metric name, value)` for all 18 report rows.
    pub fn rows(&self) -> Vec<(String, Option<f64>)> {
        let mut out: Vec<(String, Option<f64>)> = KnowledgeType::ALL
            .iter()
            .map(|t| (format!("auprc:{}", t.name()), self.auprc[t.index()]))
            .collect();
        out.extend(MULTI_LABEL_METRICS.iter().map(|m| (m.to_string(), self.metric(m))));
        out
    }
}

pub fn evaluate_predictions(
    model: &str,
    corpus: &str,
    fold: Option<usize>,
    predictions: &Predictions,
    truth: &[LabelSet],
    threshold: f64,
) -> Result<EvalReport> {
    let ranking = PredictionMatrix::new(predictions.ranking.clone(), truth.to_vec())?;
    let decisions = PredictionMatrix::new(predictions.probability.clone(), truth.to_vec())?;
    let mut per_type = [None; NUM_TYPES];
    for t in KnowledgeType::ALL {
        let (scores, y) = ranking.column(t);
        per_type[t.index()] = auprc(&scores, &y);
    }
    let macros = macro_metrics(&ranking, &decisions, threshold);
    Ok(EvalReport {
        model: model.to_string(),
        corpus: corpus.to_string(),
        fold,
        threshold,
        auprc: per_type,
        hamming_loss: hamming_loss(&decisions, threshold),
        subset_accuracy: subset_accuracy(&decisions, threshold),
        macro_precision: macros.precision,
        macro_recall: macros.recall,
        macro_f1: macros.f1,
        macro_auc: macros.auc,
        auc_excluded: macros.auc_excluded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanStd { mean, std, n })
}

/// Mean and deviation of each report row across folds, skipping folds where
/// a value is undefined.
pub fn summarize(reports: &[EvalReport]) -> Vec<(String, Option<MeanStd>)> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    let names: Vec<String> = first.rows().into_iter().map(|(n, _)| n).collect();
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.rows()[i].1).collect();
            (name.clone(), mean_std(&vals))
        })
        .collect()
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

/// CSV with columns `model,corpus,fold,metric,value`. Single evaluations
/// use fold `holdout`; fold lists are followed by `mean` and `std` rows.
pub fn write_csv<W: Write>(w: W, groups: &[Vec<EvalReport>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| crate::error::Error::InvalidArgument(format!("writing report CSV: {e}"));
    out.write_record(["model", "corpus", "fold", "metric", "value"]).map_err(csv_err)?;
    for reports in groups {
        for r in reports {
            let fold = r.fold.map_or_else(|| "holdout".to_string(), |f| f.to_string());
            for (metric, value) in r.rows() {
                out.write_record([&r.model, &r.corpus, &fold, &metric, &fmt_value(value)])
                    .map_err(csv_err)?;
            }
        }
        if reports.iter().any(|r| r.fold.is_some()) {
            let r = &reports[0];
            for (metric, s) in summarize(reports) {
                out.write_record([&r.model, &r.corpus, "mean", &metric, &fmt_value(s.map(|s| s.mean))])
                    .map_err(csv_err)?;
                out.write_record([&r.model, &r.corpus, "std", &metric, &fmt_value(s.map(|s| s.std))])
                    .map_err(csv_err)?;
            }
        }
    }
    out.flush().map_err(|e| crate::error::Error::InvalidArgument(format!("writing report CSV: {e}")))?;
    Ok(())
}

fn cell(s: Option<MeanStd>) -> String {
    match s {
        None => "n/a".to_string(),
        Some(s) if s.n > 1 => format!("{:.2} ± {:.2}", s.mean, s.std),
        Some(s) => format!("{:.2}", s.mean),
    }
}

/// Markdown tables: per-type AUPRC, then multi-label metrics, one column per
/// model. Each group holds the reports of one model on one corpus.
pub fn markdown_tables(groups: &[Vec<EvalReport>]) -> String {
    let mut corpora: Vec<&str> = Vec::new();
    for g in groups {
        if let Some(r) = g.first() {
            if !corpora.contains(&r.corpus.as_str()) {
                corpora.push(&r.corpus);
            }
        }
    }
    let mut md = String::new();
    for corpus in corpora {
        let cols: Vec<&Vec<EvalReport>> = groups
            .iter()
            .filter(|g| g.first().is_some_and(|r| r.corpus == corpus))
            .collect();
        let summaries: Vec<Vec<(String, Option<MeanStd>)>> = cols.iter().map(|g| summarize(g)).collect();
        let header: Vec<&str> = cols.iter().map(|g| g[0].model.as_str()).collect();
        let threshold = cols[0][0].threshold;

        let _ = writeln!(md, "## {corpus}\n");
        let _ = writeln!(md, "### AUPRC per knowledge type\n");
        let _ = writeln!(md, "| Knowledge type | {} |", header.join(" | "));
        let _ = writeln!(md, "|---|{}", "---|".repeat(header.len()));
        for t in KnowledgeType::ALL {
            let cells: Vec<String> = summaries.iter().map(|s| cell(s[t.index()].1)).collect();
            let _ = writeln!(md, "| {} | {} |", t.display_name(), cells.join(" | "));
        }
        let _ = writeln!(md, "\n### Multi-label metrics (threshold {threshold})\n");
        let _ = writeln!(md, "| Metric | {} |", header.join(" | "));
        let _ = writeln!(md, "|---|{}", "---|".repeat(header.len()));
        for (m, name) in MULTI_LABEL_METRICS.iter().enumerate() {
            let cells: Vec<String> = summaries.iter().map(|s| cell(s[NUM_TYPES + m].1)).collect();
            let _ = writeln!(md, "| {} | {} |", metric_title(name), cells.join(" | "));
        }
        let mut notes = Vec::new();
        for g in &cols {
            let mut excluded: Vec<KnowledgeType> = g.iter().flat_map(|r| r.auc_excluded.iter().copied()).collect();
            excluded.sort_by_key(|t| t.index());
            excluded.dedup();
            if !excluded.is_empty() {
                let names: Vec<&str> = excluded.iter().map(|t| t.display_name()).collect();
                notes.push(format!(
                    "- {}: MacroAUC excludes single-class types: {}",
                    g[0].model,
                    names.join(", ")
                ));
            }
        }
        if !notes.is_empty() {
            let _ = writeln!(md, "\n{}", notes.join("\n"));
        }
        md.push('\n');
    }
    md.push_str("Baselines enter the AUPRC table with their one-hot outputs as scores.\n");
    md
}

fn metric_title(name: &str) -> &'static str {
    match name {
        "hamming_loss" => "Hamming loss",
        "subset_accuracy" => "Subset accuracy",
        "macro_precision" => "Macro precision",
        "macro_recall" => "Macro recall",
        "macro_f1" => "Macro F1",
        _ => "MacroAUC",
    }
}
