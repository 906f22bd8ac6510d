use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{anova_oneway, roc_curve, AnovaResult, ConfusionMatrix, Metrics, RocCurve};
use crate::automl::{Classifier, PipelineFactory};
use crate::dataset::{Dataset, Target};
use crate::scores::{apply_threshold, score_predict, ScoreKind, ScoreSet, ScoreThreshold};
use crate::splitter::Partition;
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Cut-off applied to predicted probabilities (positive when `p >= t`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityThreshold {
    Fixed(f64),
    /// Maximise F1 on the training rows; ties go to the lower cut-off.
    Fit,
}

impl Default for ProbabilityThreshold {
    fn default() -> Self {
        ProbabilityThreshold::Fixed(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tool {
    Pipeline,
    Score(ScoreKind),
}

impl Tool {
    pub const ALL: [Tool; 4] = [
        Tool::Pipeline,
        Tool::Score(ScoreKind::Apfel),
        Tool::Score(ScoreKind::Koivuranta),
        Tool::Score(ScoreKind::Guideline),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tool::Pipeline => "pipeline",
            Tool::Score(k) => k.name(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KFoldConfig {
    pub scores: ScoreSet,
    pub score_policy: ScoreThreshold,
    pub probability_threshold: ProbabilityThreshold,
    pub seed: u64,
    /// How the partition was produced (recorded only).
    pub partition_method: String,
    pub config_hash: Option<String>,
}

impl Default for KFoldConfig {
    fn default() -> Self {
        KFoldConfig {
            scores: ScoreSet::default(),
            score_policy: ScoreThreshold::Fit,
            probability_threshold: ProbabilityThreshold::default(),
            seed: 0,
            partition_method: "unspecified".into(),
            config_hash: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolReport {
    pub tool: String,
    pub threshold_policy: String,
    pub folds: Vec<FoldResult>,
    pub mean: MeanMetrics,
    /// From the pooled out-of-fold scores; absent when they hold one class.
    pub roc: Option<RocCurve>,
}

impl ToolReport {
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.metrics.accuracy).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedFold {
    pub fold: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub artifact_version: String,
    pub seed: u64,
    pub config_hash: Option<String>,
    pub partition_id: String,
    pub partition_method: String,
    pub factory: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub target: Target,
    pub target_column: String,
    pub k: usize,
    pub evaluated_folds: usize,
    pub skipped_folds: Vec<SkippedFold>,
    pub tools: Vec<ToolReport>,
    /// One-way ANOVA over per-fold accuracies, one group per tool.
    pub anova: Option<AnovaResult>,
    pub anova_note: Option<String>,
    /// Pipeline chosen in each evaluated fold.
    pub fold_pipelines: Vec<String>,
    pub provenance: Provenance,
}

impl EvaluationReport {
    pub fn tool(&self, name: &str) -> Option<&ToolReport> {
        self.tools.iter().find(|t| t.tool == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Stable identifier of an assignment.
pub fn partition_id(p: &Partition) -> String {
    let text: String = p.assignment().iter().map(|c| format!("{c},")).collect();
    format!("{:016x}", crate::rng::hash_str(&text))
}

fn hits_f1(probs: &[f64], labels: &[u8], t: f64) -> f64 {
    let preds: Vec<u8> = probs.iter().map(|&p| u8::from(p >= t)).collect();
    ConfusionMatrix::from_predictions(&preds, labels).metrics().f1
}

/// F1-maximising cut-off over the distinct training probabilities.
pub fn fit_probability_threshold(probs: &[f64], labels: &[u8]) -> f64 {
    let mut cands: Vec<f64> = probs.to_vec();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut best = (0.5, f64::NEG_INFINITY);
    for t in cands {
        let f = hits_f1(probs, labels, t);
        if f > best.1 {
            best = (t, f);
        }
    }
    best.0
}

struct ToolFold {
    threshold: f64,
    confusion: ConfusionMatrix,
    /// Ranking scores of the test rows (probabilities or integer scores).
    test_scores: Vec<f64>,
}

enum FoldOutcome {
    Skipped(String),
    Done {
        tools: Vec<ToolFold>,
        test_rows: Vec<usize>,
        n_train: usize,
        pipeline: Option<String>,
    },
}

fn run_fold(
    factory: &dyn PipelineFactory,
    d: &Dataset,
    p: &Partition,
    fold: usize,
    target: Target,
    tools: &[Tool],
    cfg: &KFoldConfig,
) -> Result<FoldOutcome> {
    let train_rows = p.complement(fold);
    let test_rows: Vec<usize> = (0..p.n_records()).filter(|&i| p.assignment()[i] == fold).collect();
    let train = d.subset(&train_rows);
    let test = d.subset(&test_rows);
    let y_train = train.target(target);
    if y_train.iter().all(|&v| v == y_train[0]) {
        return Ok(FoldOutcome::Skipped(format!(
            "training rows of fold {fold} contain only class {}",
            y_train[0]
        )));
    }
    let y_test = test.target(target);
    let mut out = Vec::with_capacity(tools.len());
    let mut pipeline = None;
    for &tool in tools {
        let tf = match tool {
            Tool::Pipeline => {
                let seed = crate::rng::derive_seed(cfg.seed, fold as u64);
                let model: Box<dyn Classifier> = factory.fit(&train, target, seed)?;
                pipeline = Some(model.describe());
                let threshold = match cfg.probability_threshold {
                    ProbabilityThreshold::Fixed(t) => t,
                    ProbabilityThreshold::Fit => fit_probability_threshold(&model.predict_proba(&train)?, y_train),
                };
                let probs = model.predict_proba(&test)?;
                let preds: Vec<u8> = probs.iter().map(|&q| u8::from(q >= threshold)).collect();
                ToolFold {
                    threshold,
                    confusion: ConfusionMatrix::from_predictions(&preds, y_test),
                    test_scores: probs,
                }
            }
            Tool::Score(kind) => {
                let def = cfg.scores.get(kind);
                let (threshold, _) = score_predict(&def.score_all(&train), y_train, cfg.score_policy)?;
                let test_scores = def.score_all(&test);
                let preds = apply_threshold(&test_scores, threshold);
                ToolFold {
                    threshold: f64::from(threshold),
                    confusion: ConfusionMatrix::from_predictions(&preds, y_test),
                    test_scores: test_scores.iter().map(|&s| f64::from(s)).collect(),
                }
            }
        };
        out.push(tf);
    }
    Ok(FoldOutcome::Done {
        tools: out,
        test_rows,
        n_train: train_rows.len(),
        pipeline,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Cohort-wise cross-validation: each cohort of `p` is held out once while
/// every tool is fitted on the remaining cohorts.
pub fn kfold_evaluate(
    factory: &dyn PipelineFactory,
    d: &Dataset,
    p: &Partition,
    target: Target,
    tools: &[Tool],
    cfg: &KFoldConfig,
) -> Result<EvaluationReport> {
    if p.n_records() != d.n_rows() {
        return Err(Error::contract("partition does not cover the dataset"));
    }
    if tools.is_empty() {
        return Err(Error::contract("no tools to evaluate"));
    }
    let outcomes: Vec<Result<FoldOutcome>> = (0..p.k())
        .into_par_iter()
        .map(|fold| run_fold(factory, d, p, fold, target, tools, cfg))
        .collect();

    let labels = d.target(target);
    let mut skipped = Vec::new();
    let mut per_tool: Vec<Vec<FoldResult>> = vec![Vec::new(); tools.len()];
    let mut pooled: Vec<Vec<(usize, f64)>> = vec![Vec::new(); tools.len()];
    let mut fold_pipelines = Vec::new();
    for (fold, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            FoldOutcome::Skipped(reason) => {
                log::warn!("{reason}; fold skipped");
                skipped.push(SkippedFold { fold, reason });
            }
            FoldOutcome::Done { tools: tf, test_rows, n_train, pipeline } => {
                if let Some(desc) = pipeline {
                    fold_pipelines.push(format!("fold {fold}: {desc}"));
                }
                for (t, r) in tf.into_iter().enumerate() {
                    pooled[t].extend(test_rows.iter().copied().zip(r.test_scores.iter().copied()));
                    per_tool[t].push(FoldResult {
                        fold,
                        n_train,
                        n_test: test_rows.len(),
                        threshold: r.threshold,
                        confusion: r.confusion,
                        metrics: r.confusion.metrics(),
                    });
                }
            }
        }
    }

    let mut reports = Vec::with_capacity(tools.len());
    for (t, &tool) in tools.iter().enumerate() {
        let folds = std::mem::take(&mut per_tool[t]);
        let m = |f: fn(&Metrics) -> f64| mean(folds.iter().map(|r| f(&r.metrics)));
        let mean_metrics = MeanMetrics {
            accuracy: m(|x| x.accuracy),
            recall: m(|x| x.recall),
            precision: m(|x| x.precision),
            f1: m(|x| x.f1),
        };
        let mut pairs = std::mem::take(&mut pooled[t]);
        pairs.sort_by_key(|&(row, _)| row);
        let scores: Vec<f64> = pairs.iter().map(|&(_, s)| s).collect();
        let y: Vec<u8> = pairs.iter().map(|&(row, _)| labels[row]).collect();
        let roc = roc_curve(&scores, &y).ok();
        let threshold_policy = match tool {
            Tool::Pipeline => match cfg.probability_threshold {
                ProbabilityThreshold::Fixed(t) => format!("fixed {t}"),
                ProbabilityThreshold::Fit => "fitted by F1 on training folds".into(),
            },
            Tool::Score(_) => match cfg.score_policy {
                ScoreThreshold::Fixed(t) => format!("fixed {t}"),
                ScoreThreshold::Fit => "fitted by F1 on training folds".into(),
            },
        };
        reports.push(ToolReport {
            tool: tool.name().to_string(),
            threshold_policy,
            folds,
            mean: mean_metrics,
            roc,
        });
    }

    let groups: Vec<Vec<f64>> = reports.iter().map(ToolReport::fold_accuracies).collect();
    let (anova, anova_note) = match anova_oneway(&groups) {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };

    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        target,
        target_column: target.column().to_string(),
        k: p.k(),
        evaluated_folds: p.k() - skipped.len(),
        skipped_folds: skipped,
        tools: reports,
        anova,
        anova_note,
        fold_pipelines,
        provenance: Provenance {
            artifact_version: crate::ARTIFACT_VERSION.to_string(),
            seed: cfg.seed,
            config_hash: cfg.config_hash.clone(),
            partition_id: partition_id(p),
            partition_method: cfg.partition_method.clone(),
            factory: factory.describe(),
        },
    })
}
