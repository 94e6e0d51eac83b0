//! Linear soft-margin SVM over sparse count features.
//!
//! Training minimizes `1/2 (|w|^2 + b^2) + C * sum_i max(0, 1 - y_i (w.x_i + b))`
//! by randomized dual coordinate descent: each epoch visits every example once
//! in a seeded random order and solves its box-constrained dual coordinate
//! exactly. The bias is handled as an extra constant feature.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::auprc;
use crate::text::SparseCountVector;

pub const DEFAULT_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub max_epochs: usize,
    /// Stop once the projected-gradient spread falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            max_epochs: 200,
            tolerance: 1e-3,
            seed: 0,
        }
    }
}

/// Platt sigmoid `p = 1 / (1 + exp(-(a * score + b)))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub platt: Option<Platt>,
    /// Primal objective at `w = 0` followed by one value per epoch.
    pub objective_history: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sign(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}

fn primal_objective(w: &[f64], b: f64, c: f64, x: &[SparseCountVector], y: &[bool]) -> f64 {
    let reg = 0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - sign(yi) * (xi.dot_dense(w) + b)).max(0.0))
        .sum();
    reg + c * hinge
}

pub fn svm_train(x: &[SparseCountVector], y: &[bool], dim: usize, params: &SvmParams) -> Result<SvmModel> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("features and labels must align".into()));
    }
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Degenerate("SVM training data holds a single class".into()));
    }
    if !(params.c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {}", params.c)));
    }
    let c = params.c;
    let n = x.len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    // diagonal of Q including the constant bias feature
    let q_diag: Vec<f64> = x.iter().map(|xi| xi.squared_norm() as f64 + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut history = vec![primal_objective(&w, b, c, x, y)];

    for _ in 0..params.max_epochs {
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let yi = sign(y[i]);
            let g = yi * (x[i].dot_dense(&w) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * yi;
                if delta != 0.0 {
                    for &(j, v) in x[i].entries() {
                        w[j as usize] += delta * v as f64;
                    }
                    b += delta;
                }
            }
        }
        let obj = primal_objective(&w, b, c, x, y);
        if !obj.is_finite() {
            return Err(Error::NonFinite {
                stage: "svm".into(),
                epoch: history.len() - 1,
            });
        }
        history.push(obj);
        if pg_max - pg_min < params.tolerance {
            break;
        }
    }
    Ok(SvmModel {
        weights: w,
        bias: b,
        c,
        platt: None,
        objective_history: history,
    })
}

impl SvmModel {
    /// Signed margin `w.x + b`.
    pub fn score(&self, x: &SparseCountVector) -> f64 {
        x.dot_dense(&self.weights) + self.bias
    }

    pub fn probability(&self, x: &SparseCountVector) -> Result<f64> {
        let p = self
            .platt
            .ok_or_else(|| Error::InvalidArgument("SVM has no Platt calibration".into()))?;
        Ok(sigmoid(p.a * self.score(x) + p.b))
    }
}

pub fn svm_score(model: &SvmModel, x: &SparseCountVector) -> f64 {
    model.score(x)
}

pub fn svm_probability(model: &SvmModel, x: &SparseCountVector) -> Result<f64> {
    model.probability(x)
}

/// Fits Platt's sigmoid by Newton's method with backtracking, using the
/// regularized targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
pub fn fit_platt(scores: &[f64], labels: &[bool]) -> Platt {
    let prior1 = labels.iter().filter(|&&l| l).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    // Parameterized as p = 1 / (1 + exp(A f + B)), converted at the end.
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let sigma = 1e-12;
    let objective = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let fab = f * a + b;
                if fab >= 0.0 {
                    ti * fab + (1.0 + (-fab).exp()).ln()
                } else {
                    (ti - 1.0) * fab + (1.0 + fab.exp()).ln()
                }
            })
            .sum()
    };
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (&f, &ti) in scores.iter().zip(&t) {
            let fab = f * a + b;
            let (p, q) = if fab >= 0.0 {
                let e = (-fab).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = fab.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut improved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if !improved {
            break;
        }
    }
    Platt { a: -a, b: -b }
}

fn gather<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

fn has_both(y: &[bool]) -> bool {
    y.iter().any(|&v| v) && y.iter().any(|&v| !v)
}

/// Trains on the full data and attaches a Platt sigmoid fitted on a seeded,
/// class-stratified 20% hold-out scored by a model trained on the remaining
/// 80%. When either class has fewer than two examples, the sigmoid is fitted
/// on the full model's training scores instead.
pub fn svm_fit_calibrated(
    x: &[SparseCountVector],
    y: &[bool],
    dim: usize,
    params: &SvmParams,
) -> Result<SvmModel> {
    let mut model = svm_train(x, y, dim, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut cal_idx = Vec::new();
    let mut fit_idx = Vec::new();
    let mut enough = true;
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < 2 {
            enough = false;
            break;
        }
        idx.shuffle(&mut rng);
        let take = ((idx.len() as f64 * 0.2).round() as usize).clamp(1, idx.len() - 1);
        cal_idx.extend_from_slice(&idx[..take]);
        fit_idx.extend_from_slice(&idx[take..]);
    }
    let platt = if enough {
        cal_idx.sort_unstable();
        fit_idx.sort_unstable();
        let sub = svm_train(&gather(x, &fit_idx), &gather(y, &fit_idx), dim, params)?;
        let scores: Vec<f64> = cal_idx.iter().map(|&i| sub.score(&x[i])).collect();
        fit_platt(&scores, &gather(y, &cal_idx))
    } else {
        let scores: Vec<f64> = x.iter().map(|xi| model.score(xi)).collect();
        fit_platt(&scores, y)
    };
    model.platt = Some(platt);
    Ok(model)
}

/// Contiguous chunks of a seeded permutation, as in k-fold splitting.
pub(crate) fn index_folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (q, r) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = q + usize::from(f < r);
        out.push(perm[start..start + size].to_vec());
        start += size;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub c: f64,
    /// Mean inner-fold AUPRC; `None` when every fold was degenerate.
    pub mean_auprc: Option<f64>,
    pub folds_used: usize,
}

#[derive(Clone, Debug)]
pub struct GridSearchResult {
    pub model: SvmModel,
    pub best_c: f64,
    pub cells: Vec<GridCell>,
}

/// Picks `C` by mean inner-fold AUPRC (ties go to the smaller `C`) and refits
/// a calibrated model on all of `x`.
pub fn grid_search_svm(
    x: &[SparseCountVector],
    y: &[bool],
    dim: usize,
    grid: &[f64],
    inner_folds: usize,
    base: &SvmParams,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid must contain at least one C".into()));
    }
    if inner_folds < 2 || inner_folds > x.len() {
        return Err(Error::InvalidArgument(format!(
            "inner folds {inner_folds} invalid for {} examples",
            x.len()
        )));
    }
    let folds = index_folds(x.len(), inner_folds, base.seed);
    let mut grid: Vec<f64> = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let cells: Vec<GridCell> = grid
        .par_iter()
        .map(|&c| {
            let params = SvmParams { c, ..base.clone() };
            let mut scores = Vec::new();
            for (f, test_idx) in folds.iter().enumerate() {
                let train_idx: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|(g, _)| *g != f)
                    .flat_map(|(_, idx)| idx.iter().copied())
                    .collect();
                let train_y = gather(y, &train_idx);
                let test_y = gather(y, test_idx);
                if !has_both(&train_y) || !test_y.iter().any(|&v| v) {
                    warn!("grid search: skipping degenerate inner fold {f} for C={c}");
                    continue;
                }
                let model = match svm_train(&gather(x, &train_idx), &train_y, dim, &params) {
                    Ok(m) => m,
                    Err(e) => {
                        warn!("grid search: fold {f} for C={c} failed: {e}");
                        continue;
                    }
                };
                let s: Vec<f64> = test_idx.iter().map(|&i| model.score(&x[i])).collect();
                if let Some(ap) = auprc(&s, &test_y) {
                    scores.push(ap);
                }
            }
            GridCell {
                c,
                mean_auprc: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
                folds_used: scores.len(),
            }
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for cell in &cells {
        if let Some(score) = cell.mean_auprc {
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((cell.c, score));
            }
        }
    }
    let (best_c, _) = best.ok_or_else(|| Error::Degenerate("every grid-search fold was degenerate".into()))?;
    let model = svm_fit_calibrated(x, y, dim, &SvmParams { c: best_c, ..base.clone() })?;
    Ok(GridSearchResult { model, best_c, cells })
}
