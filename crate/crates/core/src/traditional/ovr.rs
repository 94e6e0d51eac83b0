//! Binary relevance: one independent SVM per knowledge type.

use log::warn;
use rayon::prelude::*;

use crate::corpus::{KnowledgeType, LabelSet, NUM_TYPES};
use crate::error::{Error, Result};
use crate::text::SparseCountVector;

use super::svm::{grid_search_svm, sigmoid, svm_fit_calibrated, GridCell, SvmModel, SvmParams};

#[derive(Clone, Debug, PartialEq)]
pub enum TypeModel {
    Svm(SvmModel),
    /// Used when training data holds a single class for the type.
    Constant(f64),
}

impl TypeModel {
    /// Probability from the Platt sigmoid.
    pub fn probability(&self, x: &SparseCountVector) -> Result<f64> {
        match self {
            TypeModel::Svm(m) => m.probability(x),
            TypeModel::Constant(p) => Ok(*p),
        }
    }

    /// Ranking score: the margin squashed into `[0, 1]`.
    pub fn ranking_score(&self, x: &SparseCountVector) -> f64 {
        match self {
            TypeModel::Svm(m) => sigmoid(m.score(x)),
            TypeModel::Constant(p) => *p,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OvrSvm {
    models: Vec<TypeModel>,
}

fn column(labels: &[LabelSet], t: KnowledgeType) -> Vec<bool> {
    labels.iter().map(|y| y.contains(t)).collect()
}

fn single_class(y: &[bool], t: KnowledgeType) -> Option<TypeModel> {
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 {
        warn!("type {} absent from training data; predicting constant 0", t.name());
        Some(TypeModel::Constant(0.0))
    } else if pos == y.len() {
        warn!("type {} present in every training document; predicting constant 1", t.name());
        Some(TypeModel::Constant(1.0))
    } else {
        None
    }
}

/// Binary relevance with a fixed `C` shared by all types.
pub fn ovr_svm(x: &[SparseCountVector], labels: &[LabelSet], dim: usize, params: &SvmParams) -> Result<OvrSvm> {
    if x.len() != labels.len() {
        return Err(Error::InvalidArgument("features and labels must align".into()));
    }
    let models = KnowledgeType::ALL
        .par_iter()
        .map(|&t| {
            let y = column(labels, t);
            match single_class(&y, t) {
                Some(m) => Ok(m),
                None => svm_fit_calibrated(x, &y, dim, params).map(TypeModel::Svm),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OvrSvm { models })
}

/// One grid-searched SVM per type. A type whose inner folds are all
/// degenerate falls back to the base `C`.
pub fn per_type_grid_svm(
    x: &[SparseCountVector],
    labels: &[LabelSet],
    dim: usize,
    grid: &[f64],
    inner_folds: usize,
    base: &SvmParams,
) -> Result<(OvrSvm, Vec<Vec<GridCell>>)> {
    if x.len() != labels.len() {
        return Err(Error::InvalidArgument("features and labels must align".into()));
    }
    let fitted = KnowledgeType::ALL
        .par_iter()
        .map(|&t| {
            let y = column(labels, t);
            if let Some(m) = single_class(&y, t) {
                return Ok((m, Vec::new()));
            }
            match grid_search_svm(x, &y, dim, grid, inner_folds, base) {
                Ok(r) => Ok((TypeModel::Svm(r.model), r.cells)),
                Err(Error::Degenerate(msg)) => {
                    warn!("type {}: {msg}; using C={}", t.name(), base.c);
                    Ok((TypeModel::Svm(svm_fit_calibrated(x, &y, dim, base)?), Vec::new()))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (models, cells) = fitted.into_iter().unzip();
    Ok((OvrSvm { models }, cells))
}

impl OvrSvm {
    pub fn from_models(models: Vec<TypeModel>) -> Result<Self> {
        if models.len() != NUM_TYPES {
            return Err(Error::ModelFormat(format!("expected {NUM_TYPES} per-type models, got {}", models.len())));
        }
        Ok(OvrSvm { models })
    }

    pub fn models(&self) -> &[TypeModel] {
        &self.models
    }

    pub fn model(&self, t: KnowledgeType) -> &TypeModel {
        &self.models[t.index()]
    }

    pub fn predict_proba(&self, x: &SparseCountVector) -> Result<[f64; NUM_TYPES]> {
        let mut out = [0.0; NUM_TYPES];
        for (o, m) in out.iter_mut().zip(&self.models) {
            *o = m.probability(x)?;
        }
        Ok(out)
    }

    pub fn ranking_scores(&self, x: &SparseCountVector) -> [f64; NUM_TYPES] {
        let mut out = [0.0; NUM_TYPES];
        for (o, m) in out.iter_mut().zip(&self.models) {
            *o = m.ranking_score(x);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Feature `t` marks type `t`; each document carries two types.
    fn planted() -> (Vec<SparseCountVector>, Vec<LabelSet>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for a in 0..NUM_TYPES {
            for b in (a + 1)..NUM_TYPES {
                x.push(SparseCountVector::from_pairs(vec![(a as u32, 1), (b as u32, 1)]));
                y.push([KnowledgeType::ALL[a], KnowledgeType::ALL[b]].into_iter().collect());
            }
        }
        (x, y)
    }

    #[test]
    fn planted_labels_fit_exactly() {
        let (x, y) = planted();
        let m = ovr_svm(&x, &y, NUM_TYPES, &SvmParams::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let p = m.predict_proba(xi).unwrap();
            let decided: LabelSet = KnowledgeType::ALL.into_iter().filter(|t| p[t.index()] >= 0.5).collect();
            assert_eq!(&decided, yi);
        }
    }

    #[test]
    fn absent_type_is_constant_zero() {
        let (x, mut y) = planted();
        for set in &mut y {
            *set = set.iter().filter(|&t| t != KnowledgeType::Pattern).collect();
        }
        let m = ovr_svm(&x, &y, NUM_TYPES, &SvmParams::default()).unwrap();
        assert_eq!(m.model(KnowledgeType::Pattern), &TypeModel::Constant(0.0));
        assert_eq!(m.predict_proba(&x[0]).unwrap()[KnowledgeType::Pattern.index()], 0.0);
    }

    #[test]
    fn matches_independent_binary_models() {
        let (x, y) = planted();
        let params = SvmParams { seed: 4, ..Default::default() };
        let m = ovr_svm(&x, &y, NUM_TYPES, &params).unwrap();
        for t in [KnowledgeType::Concept, KnowledgeType::Reference] {
            let alone = svm_fit_calibrated(&x, &column(&y, t), NUM_TYPES, &params).unwrap();
            assert_eq!(m.model(t), &TypeModel::Svm(alone));
        }
    }
}
