//! Classification metrics, ROC analysis, one-way ANOVA and cohort-wise
//! cross-validation.

mod anova;
mod kfold;
mod metrics;
mod roc;
mod special;

pub use anova::{anova_oneway, AnovaResult};
pub use kfold::{
    fit_probability_threshold, kfold_evaluate, partition_id, EvaluationReport, FoldResult, KFoldConfig,
    MeanMetrics, ProbabilityThreshold, Provenance, SkippedFold, Tool, ToolReport, REPORT_SCHEMA_VERSION,
};
pub use metrics::{metrics, ConfusionMatrix, MetricFlags, Metrics};
pub use roc::{auc, roc_curve, RocCurve, RocPoint};
pub use special::{f_upper_tail, ln_gamma, reg_inc_beta};
