//! Toolkit for developing and validating postoperative nausea and vomiting
//! (PONV) risk models.
//!
//! The crate covers the whole model-development loop:
//!
//! - [`dataset`]: schema-validated patient tables, descriptive statistics,
//!   correlation matrices and a planted-signal synthetic generator.
//! - [`scores`]: the Apfel, Koivuranta and consensus-guideline baseline scores.
//! - [`splitter`]: size-balanced k-fold partitions whose folds share the same
//!   (age, sex) distribution, found with a directed bee colony search.
//! - [`automl`]: genetic search over small preprocessing + tree-ensemble
//!   pipelines, followed by grid refinement of the winner.
//! - [`model`]: CART trees, random forests, gradient boosting and
//!   cost-complexity pruning.
//! - [`evaluation`]: confusion metrics, ROC/AUC, k-fold orchestration and
//!   one-way ANOVA.
//! - [`explain`]: noise-floor ablation importance and exact interventional
//!   Shapley attributions for tree ensembles.

pub mod automl;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod model;
pub mod rng;
pub mod scores;
pub mod splitter;

pub use error::{Error, Result};

/// Version string written into every artifact.
pub const ARTIFACT_VERSION: &str = concat!("ponv-core/", env!("CARGO_PKG_VERSION"));
