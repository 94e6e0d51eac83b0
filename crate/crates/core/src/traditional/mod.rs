//! Classifiers over n-gram count features.

pub mod baseline;
pub mod knn;
pub mod mlknn;
pub mod ovr;
pub mod svm;

pub use baseline::{baseline_predict, BaselineKind, BaselineModel};
pub use knn::{knn_predict, KnnModel};
pub use mlknn::{mlknn_train, MlknnModel};
pub use ovr::{ovr_svm, per_type_grid_svm, OvrSvm, TypeModel};
pub use svm::{fit_platt, grid_search_svm, svm_fit_calibrated, svm_probability, svm_score, svm_train, Platt, SvmModel, SvmParams};
