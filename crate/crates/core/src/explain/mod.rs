//! Feature importance by retrain-without-feature ablation against a noise
//! floor, and exact Shapley attributions for tree models.

mod ablation;
mod shap;

pub use ablation::{ablation_importance, cv_accuracy, ImportanceVector, NOISE_FEATURE};
pub use shap::{base_value, shap_brute, shap_summary, shap_tree, ShapMatrix, BRUTE_FORCE_MAX_FEATURES};
