//! Multi-label k-nearest neighbours with Laplace-smoothed Bayes counting.
//!
//! Training counts, for every label `l` and every `c` in `0..=k`, how many
//! training documents with (and without) `l` have exactly `c` neighbours
//! carrying `l`. Prediction combines the label prior with the likelihood of
//! the query's own neighbour count.

use rayon::prelude::*;

use crate::corpus::{LabelSet, NUM_TYPES};
use crate::error::{Error, Result};
use crate::text::SparseCountVector;

use super::knn::KnnModel;

#[derive(Clone, Debug, PartialEq)]
pub struct MlknnModel {
    knn: KnnModel,
    smoothing: f64,
    prior: [f64; NUM_TYPES],
    /// `likelihood_pos[l][c] = P(E_c | H1_l)`.
    likelihood_pos: Vec<Vec<f64>>,
    /// `likelihood_neg[l][c] = P(E_c | H0_l)`.
    likelihood_neg: Vec<Vec<f64>>,
}

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_SMOOTHING: f64 = 1.0;

pub fn mlknn_train(
    vectors: Vec<SparseCountVector>,
    labels: Vec<LabelSet>,
    k: usize,
    smoothing: f64,
) -> Result<MlknnModel> {
    let m = vectors.len();
    if k >= m {
        return Err(Error::InvalidArgument(format!(
            "ML-kNN needs more training documents ({m}) than k ({k})"
        )));
    }
    if !(smoothing > 0.0) {
        return Err(Error::InvalidArgument("smoothing must be positive".into()));
    }
    let knn = KnnModel::new(vectors, labels, k)?;

    let mut prior = [0.0; NUM_TYPES];
    for (l, p) in prior.iter_mut().enumerate() {
        let with = knn.labels().iter().filter(|y| y.bits() & (1 << l) != 0).count();
        *p = (smoothing + with as f64) / (2.0 * smoothing + m as f64);
    }

    let neighbour_counts: Vec<[usize; NUM_TYPES]> = (0..m)
        .into_par_iter()
        .map(|i| knn.neighbor_counts(&knn.vectors()[i], k, Some(i)))
        .collect();

    let mut c_pos = vec![vec![0usize; k + 1]; NUM_TYPES];
    let mut c_neg = vec![vec![0usize; k + 1]; NUM_TYPES];
    for (counts, y) in neighbour_counts.iter().zip(knn.labels()) {
        for l in 0..NUM_TYPES {
            if y.bits() & (1 << l) != 0 {
                c_pos[l][counts[l]] += 1;
            } else {
                c_neg[l][counts[l]] += 1;
            }
        }
    }
    let smooth = |table: &Vec<usize>| -> Vec<f64> {
        let total: usize = table.iter().sum();
        let den = smoothing * (k + 1) as f64 + total as f64;
        table.iter().map(|&c| (smoothing + c as f64) / den).collect()
    };
    Ok(MlknnModel {
        smoothing,
        prior,
        likelihood_pos: c_pos.iter().map(smooth).collect(),
        likelihood_neg: c_neg.iter().map(smooth).collect(),
        knn,
    })
}

impl MlknnModel {
    pub fn from_parts(
        knn: KnnModel,
        smoothing: f64,
        prior: [f64; NUM_TYPES],
        likelihood_pos: Vec<Vec<f64>>,
        likelihood_neg: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = knn.k();
        let shape_ok = |t: &Vec<Vec<f64>>| t.len() == NUM_TYPES && t.iter().all(|r| r.len() == k + 1);
        if !shape_ok(&likelihood_pos) || !shape_ok(&likelihood_neg) {
            return Err(Error::ModelFormat("ML-kNN likelihood table shape".into()));
        }
        Ok(MlknnModel {
            knn,
            smoothing,
            prior,
            likelihood_pos,
            likelihood_neg,
        })
    }

    pub fn knn(&self) -> &KnnModel {
        &self.knn
    }

    pub fn k(&self) -> usize {
        self.knn.k()
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn prior(&self) -> &[f64; NUM_TYPES] {
        &self.prior
    }

    pub fn likelihood_pos(&self) -> &[Vec<f64>] {
        &self.likelihood_pos
    }

    pub fn likelihood_neg(&self) -> &[Vec<f64>] {
        &self.likelihood_neg
    }

    /// Posterior `P(H1_l | E_c)` from precomputed neighbour counts.
    pub fn posterior_from_counts(&self, counts: &[usize; NUM_TYPES]) -> [f64; NUM_TYPES] {
        let mut out = [0.0; NUM_TYPES];
        for l in 0..NUM_TYPES {
            let c = counts[l];
            let pos = self.prior[l] * self.likelihood_pos[l][c];
            let neg = (1.0 - self.prior[l]) * self.likelihood_neg[l][c];
            out[l] = pos / (pos + neg);
        }
        out
    }

    pub fn predict(&self, x: &SparseCountVector) -> [f64; NUM_TYPES] {
        let counts = self.knn.neighbor_counts(x, self.k(), None);
        self.posterior_from_counts(&counts)
    }

    pub fn predict_batch(&self, xs: &[SparseCountVector]) -> Vec<[f64; NUM_TYPES]> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }
}
