//! Ranking and thresholded metrics over per-type score matrices.

use serde::{Deserialize, Serialize};

use crate::corpus::{KnowledgeType, LabelSet, NUM_TYPES};
use crate::error::{Error, Result};

/// Decision threshold used throughout: `score >= 0.5` is a positive.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

// Zero denominators yield 0 for every ratio below.
impl MetricCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2TP / (2TP + FP + FN)`.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// `1 - TN / (TN + FP)`.
    pub fn fpr(&self) -> f64 {
        if self.tn + self.fp == 0 {
            0.0
        } else {
            1.0 - self.tn as f64 / (self.tn + self.fp) as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

/// Scores for every (document, type) pair, aligned with ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionMatrix {
    scores: Vec<[f64; NUM_TYPES]>,
    truth: Vec<LabelSet>,
}

impl PredictionMatrix {
    pub fn new(scores: Vec<[f64; NUM_TYPES]>, truth: Vec<LabelSet>) -> Result<Self> {
        if scores.len() != truth.len() {
            return Err(Error::Mismatch(format!(
                "{} score rows vs {} truth rows",
                scores.len(),
                truth.len()
            )));
        }
        for (i, row) in scores.iter().enumerate() {
            if row.iter().any(|s| !s.is_finite() || !(0.0..=1.0).contains(s)) {
                return Err(Error::Mismatch(format!("row {i} has a score outside [0, 1]")));
            }
        }
        Ok(PredictionMatrix { scores, truth })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[[f64; NUM_TYPES]] {
        &self.scores
    }

    pub fn truth(&self) -> &[LabelSet] {
        &self.truth
    }

    pub fn column(&self, t: KnowledgeType) -> (Vec<f64>, Vec<bool>) {
        let s = self.scores.iter().map(|r| r[t.index()]).collect();
        let y = self.truth.iter().map(|l| l.contains(t)).collect();
        (s, y)
    }

    pub fn decisions(&self, threshold: f64) -> Vec<LabelSet> {
        self.scores
            .iter()
            .map(|row| {
                KnowledgeType::ALL
                    .into_iter()
                    .filter(|t| row[t.index()] >= threshold)
                    .collect()
            })
            .collect()
    }
}

/// Cumulative (tp, fp) after each distinct threshold, highest first.
fn threshold_tallies(scores: &[f64], truth: &[bool]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (k, &i) in order.iter().enumerate() {
        if truth[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_run = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_run {
            out.push((tp, fp));
        }
    }
    out
}

/// `(recall, precision)` at each distinct score threshold, highest threshold
/// first. `None` when there are no positives.
pub fn pr_curve(scores: &[f64], truth: &[bool]) -> Option<Vec<(f64, f64)>> {
    assert_eq!(scores.len(), truth.len(), "scores and truth must align");
    let positives = truth.iter().filter(|&&y| y).count();
    if positives == 0 {
        return None;
    }
    Some(
        threshold_tallies(scores, truth)
            .into_iter()
            .map(|(tp, fp)| (tp as f64 / positives as f64, tp as f64 / (tp + fp) as f64))
            .collect(),
    )
}

/// Area under the precision-recall curve as average precision,
/// `sum_k (R_k - R_{k-1}) P_k`, without interpolation.
pub fn auprc(scores: &[f64], truth: &[bool]) -> Option<f64> {
    let curve = pr_curve(scores, truth)?;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for (r, p) in curve {
        area += (r - prev_recall) * p;
        prev_recall = r;
    }
    Some(area)
}

/// Trapezoidal area under the ROC curve. `None` unless both classes occur.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), truth.len(), "scores and truth must align");
    let pos = truth.iter().filter(|&&y| y).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    let mut twice_area = 0.0;
    for (tp, fp) in threshold_tallies(scores, truth) {
        // trapezoid in (fp, tp) count space, normalised below
        twice_area += ((fp - prev_fp) * (tp + prev_tp)) as f64;
        prev_tp = tp;
        prev_fp = fp;
    }
    Some(twice_area / (2.0 * pos as f64 * neg as f64))
}

pub fn counts_at_threshold(pred: &PredictionMatrix, t: KnowledgeType, threshold: f64) -> MetricCounts {
    let mut c = MetricCounts::default();
    for (row, truth) in pred.scores.iter().zip(&pred.truth) {
        c.add(row[t.index()] >= threshold, truth.contains(t));
    }
    c
}

/// Fraction of (document, type) decisions that disagree with the truth.
pub fn hamming_loss(pred: &PredictionMatrix, threshold: f64) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let wrong: usize = pred
        .decisions(threshold)
        .iter()
        .zip(&pred.truth)
        .map(|(d, t)| (d.bits() ^ t.bits()).count_ones() as usize)
        .sum();
    wrong as f64 / (pred.len() * NUM_TYPES) as f64
}

/// Fraction of documents whose decided label set equals the truth exactly.
pub fn subset_accuracy(pred: &PredictionMatrix, threshold: f64) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let exact = pred
        .decisions(threshold)
        .iter()
        .zip(&pred.truth)
        .filter(|(d, t)| d == t)
        .count();
    exact as f64 / pred.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean per-type ROC AUC over types where it is defined.
    pub auc: Option<f64>,
    /// Types left out of `auc` because only one class occurs in the truth.
    pub auc_excluded: Vec<KnowledgeType>,
}

/// Unweighted per-type averages. Precision, recall and F1 use the
/// thresholded `decisions` matrix; AUC ranks by `ranking`.
pub fn macro_metrics(ranking: &PredictionMatrix, decisions: &PredictionMatrix, threshold: f64) -> MacroMetrics {
    let mut p = 0.0;
    let mut r = 0.0;
    let mut f = 0.0;
    let mut aucs = Vec::new();
    let mut excluded = Vec::new();
    for t in KnowledgeType::ALL {
        let c = counts_at_threshold(decisions, t, threshold);
        p += c.precision();
        r += c.recall();
        f += c.f1();
        let (s, y) = ranking.column(t);
        match roc_auc(&s, &y) {
            Some(a) => aucs.push(a),
            None => excluded.push(t),
        }
    }
    let n = NUM_TYPES as f64;
    MacroMetrics {
        precision: p / n,
        recall: r / n,
        f1: f / n,
        auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        auc_excluded: excluded,
    }
}

/// Macro AUC over one score matrix; used for model selection.
pub fn macro_auc(pred: &PredictionMatrix) -> Option<f64> {
    let aucs: Vec<f64> = KnowledgeType::ALL
        .into_iter()
        .filter_map(|t| {
            let (s, y) = pred.column(t);
            roc_auc(&s, &y)
        })
        .collect();
    (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use KnowledgeType::*;

    #[test]
    fn f1_and_fpr_substitution() {
        let c = MetricCounts { tp: 2, fp: 0, tn: 0, fn_: 0 };
        assert_eq!(c.f1(), 1.0);
        let c = MetricCounts { tp: 1, fp: 1, tn: 0, fn_: 1 };
        assert_eq!(c.f1(), 0.5);
        let c = MetricCounts { tp: 0, fp: 1, tn: 3, fn_: 0 };
        assert_eq!(c.fpr(), 0.25);
        let empty = MetricCounts::default();
        assert_eq!((empty.precision(), empty.recall(), empty.f1()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn auprc_closed_forms() {
        assert_eq!(auprc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]), Some(1.0));
        for n in 1..10 {
            let scores: Vec<f64> = (0..n).map(|i| 1.0 - i as f64 / n as f64).collect();
            let mut truth = vec![false; n];
            truth[n - 1] = true;
            let ap = auprc(&scores, &truth).unwrap();
            assert!((ap - 1.0 / n as f64).abs() < 1e-12);
        }
        assert_eq!(auprc(&[0.3, 0.2], &[false, false]), None);
    }

    #[test]
    fn pr_curve_points() {
        let curve = pr_curve(&[0.9, 0.5, 0.5, 0.1], &[true, false, true, false]).unwrap();
        assert_eq!(curve, vec![(0.5, 1.0), (1.0, 2.0 / 3.0), (1.0, 0.5)]);
    }

    #[test]
    fn roc_edge_cases() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]), Some(1.0));
        assert_eq!(roc_auc(&[0.1, 0.9], &[true, false]), Some(0.0));
        assert_eq!(roc_auc(&[0.4; 6], &[true, false, true, false, false, true]), Some(0.5));
        assert_eq!(roc_auc(&[0.4, 0.2], &[true, true]), None);
    }

    fn matrix(rows: &[[f64; NUM_TYPES]], truth: &[&[KnowledgeType]]) -> PredictionMatrix {
        PredictionMatrix::new(
            rows.to_vec(),
            truth.iter().map(|t| t.iter().copied().collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn threshold_tally_hand_case() {
        let mut rows = [[0.0; NUM_TYPES]; 3];
        rows[0][0] = 0.9;
        rows[1][0] = 0.6;
        rows[2][0] = 0.4;
        let m = matrix(&rows, &[&[Functionality], &[], &[Functionality]]);
        let c = counts_at_threshold(&m, Functionality, 0.5);
        assert_eq!(c, MetricCounts { tp: 1, fp: 1, tn: 0, fn_: 1 });

        let mut edge = [[0.0; NUM_TYPES]; 1];
        edge[0][3] = 0.5;
        let m = matrix(&edge, &[&[Purpose]]);
        assert_eq!(counts_at_threshold(&m, Purpose, 0.5).tp, 1);
    }

    #[test]
    fn hamming_and_subset_hand_cases() {
        let mut rows = [[0.0; NUM_TYPES]; 2];
        rows[0][0] = 1.0;
        rows[1][1] = 1.0;
        let perfect = matrix(&rows, &[&[Functionality], &[Concept]]);
        assert_eq!(hamming_loss(&perfect, 0.5), 0.0);
        assert_eq!(subset_accuracy(&perfect, 0.5), 1.0);

        // three wrong cells out of 24
        let mut wrong = rows;
        wrong[0][5] = 0.7;
        wrong[1][1] = 0.2;
        wrong[1][7] = 0.9;
        let m = matrix(&wrong, &[&[Functionality], &[Concept]]);
        assert_eq!(hamming_loss(&m, 0.5), 0.125);
        assert_eq!(subset_accuracy(&m, 0.5), 0.0);

        let all_wrong = matrix(&[[1.0; NUM_TYPES]], &[&[]]);
        assert_eq!(hamming_loss(&all_wrong, 0.5), 1.0);

        let one_exact = matrix(
            &[[0.0; NUM_TYPES], [0.0; NUM_TYPES], [0.0; NUM_TYPES], [0.0; NUM_TYPES]],
            &[&[], &[Concept], &[Pattern], &[Reference]],
        );
        assert_eq!(subset_accuracy(&one_exact, 0.5), 0.25);
    }

    #[test]
    fn macro_is_not_micro() {
        // Functionality: 98 true positives. Concept: 2 misses.
        let mut rows = Vec::new();
        let mut truth: Vec<&[KnowledgeType]> = Vec::new();
        for _ in 0..98 {
            let mut r = [0.0; NUM_TYPES];
            r[0] = 1.0;
            rows.push(r);
            truth.push(&[Functionality]);
        }
        for _ in 0..2 {
            rows.push([0.0; NUM_TYPES]);
            truth.push(&[Concept]);
        }
        let m = matrix(&rows, &truth);
        let mm = macro_metrics(&m, &m, 0.5);
        // ten types never occur and contribute 0 each
        assert!((mm.f1 - 1.0 / 12.0).abs() < 1e-12);
        let f = counts_at_threshold(&m, Functionality, 0.5).f1();
        let c = counts_at_threshold(&m, Concept, 0.5).f1();
        assert_eq!((f + c) / 2.0, 0.5);
        assert_eq!(mm.auc_excluded.len(), 10);
    }

    #[test]
    fn prediction_matrix_validation() {
        assert!(PredictionMatrix::new(vec![[0.5; NUM_TYPES]], vec![]).is_err());
        assert!(PredictionMatrix::new(vec![[1.5; NUM_TYPES]], vec![LabelSet::EMPTY]).is_err());
        assert!(PredictionMatrix::new(vec![[f64::NAN; NUM_TYPES]], vec![LabelSet::EMPTY]).is_err());
    }
}
