use rayon::prelude::*;

use crate::corpus::{KnowledgeType, LabelSet, NUM_TYPES};
use crate::error::{Error, Result};
use crate::text::SparseCountVector;

/// Brute-force Euclidean nearest neighbours over n-gram count vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    vectors: Vec<SparseCountVector>,
    labels: Vec<LabelSet>,
    k: usize,
}

impl KnnModel {
    pub fn new(vectors: Vec<SparseCountVector>, labels: Vec<LabelSet>, k: usize) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Degenerate("k-NN needs a non-empty training set".into()));
        }
        if vectors.len() != labels.len() {
            return Err(Error::InvalidArgument("vectors and labels must align".into()));
        }
        if k == 0 || k > vectors.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} must lie in 1..={}",
                vectors.len()
            )));
        }
        Ok(KnnModel { vectors, labels, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[SparseCountVector] {
        &self.vectors
    }

    pub fn labels(&self) -> &[LabelSet] {
        &self.labels
    }

    /// The `k` training indices closest to `x`, nearest first. Equal distances
    /// are ordered by training position; `exclude` skips one training index.
    pub fn neighbors(&self, x: &SparseCountVector, k: usize, exclude: Option<usize>) -> Vec<usize> {
        let xn = x.squared_norm();
        let mut dist: Vec<(u64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, v)| (xn + v.squared_norm() - 2 * x.dot(v), i))
            .collect();
        let k = k.min(dist.len());
        if k == 0 {
            return Vec::new();
        }
        if k < dist.len() {
            dist.select_nth_unstable(k - 1);
            dist.truncate(k);
        }
        dist.sort_unstable();
        dist.into_iter().map(|(_, i)| i).collect()
    }

    /// Number of neighbours carrying each type.
    pub fn neighbor_counts(&self, x: &SparseCountVector, k: usize, exclude: Option<usize>) -> [usize; NUM_TYPES] {
        let mut counts = [0usize; NUM_TYPES];
        for i in self.neighbors(x, k, exclude) {
            for t in self.labels[i].iter() {
                counts[t.index()] += 1;
            }
        }
        counts
    }

    /// Fraction of the `k` nearest neighbours labeled with each type.
    pub fn predict(&self, x: &SparseCountVector) -> [f64; NUM_TYPES] {
        let counts = self.neighbor_counts(x, self.k, None);
        counts.map(|c| c as f64 / self.k as f64)
    }

    pub fn predict_batch(&self, xs: &[SparseCountVector]) -> Vec<[f64; NUM_TYPES]> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }
}

/// Binary k-NN score for one target type.
pub fn knn_predict(model: &KnnModel, x: &SparseCountVector, target: KnowledgeType) -> f64 {
    model.predict(x)[target.index()]
}
