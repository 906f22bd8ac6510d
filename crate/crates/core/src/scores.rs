//! Additive clinical PONV risk scores used as baselines.
//!
//! Each score counts how many of its factors a record satisfies. Factor
//! definitions are declarative (see `score_factors.toml`) so they can be
//! audited and swapped without code changes. A factor whose input column is
//! absent or missing counts as not present.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Record, Value};
use crate::evaluation::ConfusionMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Apfel,
    Koivuranta,
    Guideline,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::Apfel, ScoreKind::Koivuranta, ScoreKind::Guideline];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Apfel => "apfel",
            ScoreKind::Koivuranta => "koivuranta",
            ScoreKind::Guideline => "guideline",
        }
    }

    /// Column in the study data that stores the precomputed score.
    pub fn stored_column(self) -> &'static str {
        match self {
            ScoreKind::Apfel => "APFEL_SCORE",
            ScoreKind::Koivuranta => "KOIV_SCORE",
            ScoreKind::Guideline => "GUID_RISK",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub column: String,
    pub op: Comparison,
    pub value: Operand,
}

impl Condition {
    pub fn holds(&self, record: &Record<'_>) -> bool {
        let Some(v) = record.get(&self.column) else {
            return false;
        };
        match &self.value {
            Operand::Label(want) => {
                let eq = match v {
                    Value::Category { label, .. } => label == want,
                    Value::Flag(b) => want == if b { "1" } else { "0" },
                    Value::Number(x) => want.parse::<f64>().is_ok_and(|w| w == x),
                };
                match self.op {
                    Comparison::Eq => eq,
                    Comparison::Ne => !eq,
                    _ => false,
                }
            }
            Operand::Number(want) => {
                let x = v.as_f64();
                match self.op {
                    Comparison::Eq => x == *want,
                    Comparison::Ne => x != *want,
                    Comparison::Lt => x < *want,
                    Comparison::Le => x <= *want,
                    Comparison::Gt => x > *want,
                    Comparison::Ge => x >= *want,
                }
            }
        }
    }
}

/// A risk factor: present when any of its conditions holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factor {
    pub name: String,
    pub when: Vec<Condition>,
}

impl Factor {
    pub fn present(&self, record: &Record<'_>) -> bool {
        self.when.iter().any(|c| c.holds(record))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreDefinition {
    pub kind: ScoreKind,
    pub factors: Vec<Factor>,
}

impl ScoreDefinition {
    pub fn max(&self) -> u32 {
        self.factors.len() as u32
    }

    pub fn score(&self, record: &Record<'_>) -> u32 {
        self.factors.iter().filter(|f| f.present(record)).count() as u32
    }

    /// Inputs of every factor are present on this record.
    pub fn inputs_complete(&self, record: &Record<'_>) -> bool {
        self.factors
            .iter()
            .flat_map(|f| &f.when)
            .all(|c| record.get(&c.column).is_some())
    }

    pub fn score_all(&self, d: &Dataset) -> Vec<u32> {
        (0..d.n_rows()).map(|i| self.score(&d.record(i))).collect()
    }
}

pub fn score(record: &Record<'_>, definition: &ScoreDefinition) -> u32 {
    definition.score(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreFile {
    apfel: Vec<Factor>,
    koivuranta: Vec<Factor>,
    guideline: Vec<Factor>,
}

/// The three baseline scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSet {
    pub apfel: ScoreDefinition,
    pub koivuranta: ScoreDefinition,
    pub guideline: ScoreDefinition,
}

impl ScoreSet {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let f: ScoreFile = toml::from_str(text)?;
        for (name, factors) in [("apfel", &f.apfel), ("koivuranta", &f.koivuranta), ("guideline", &f.guideline)] {
            if factors.is_empty() || factors.iter().any(|x| x.when.is_empty()) {
                return Err(Error::Config(format!("score {name}: every factor needs a condition")));
            }
        }
        Ok(ScoreSet {
            apfel: ScoreDefinition {
                kind: ScoreKind::Apfel,
                factors: f.apfel,
            },
            koivuranta: ScoreDefinition {
                kind: ScoreKind::Koivuranta,
                factors: f.koivuranta,
            },
            guideline: ScoreDefinition {
                kind: ScoreKind::Guideline,
                factors: f.guideline,
            },
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScoreSet::from_toml_str(&text)
    }

    pub fn get(&self, kind: ScoreKind) -> &ScoreDefinition {
        match kind {
            ScoreKind::Apfel => &self.apfel,
            ScoreKind::Koivuranta => &self.koivuranta,
            ScoreKind::Guideline => &self.guideline,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &ScoreDefinition> {
        [&self.apfel, &self.koivuranta, &self.guideline].into_iter()
    }
}

impl Default for ScoreSet {
    fn default() -> Self {
        ScoreSet::from_toml_str(DEFAULT_SCORE_FACTORS).expect("bundled score factors are valid")
    }
}

pub const DEFAULT_SCORE_FACTORS: &str = include_str!("score_factors.toml");

/// How an integer score is turned into a yes/no prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreThreshold {
    Fixed(u32),
    /// Threshold maximising F1 on the supplied (training) labels; ties go to
    /// the lower threshold.
    Fit,
}

/// Predicts positive when `score >= threshold`.
pub fn score_predict(
    scores: &[u32],
    labels: &[u8],
    policy: ScoreThreshold,
) -> Result<(u32, Vec<u8>)> {
    if scores.is_empty() {
        return Err(Error::contract("score_predict needs at least one record"));
    }
    if scores.len() != labels.len() {
        return Err(Error::contract("scores and labels differ in length"));
    }
    let threshold = match policy {
        ScoreThreshold::Fixed(t) => t,
        ScoreThreshold::Fit => fit_threshold(scores, labels),
    };
    Ok((threshold, apply_threshold(scores, threshold)))
}

pub fn apply_threshold(scores: &[u32], threshold: u32) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}

fn fit_threshold(scores: &[u32], labels: &[u8]) -> u32 {
    let top = scores.iter().copied().max().unwrap_or(0);
    let mut best = (0, f64::NEG_INFINITY);
    for t in 0..=top {
        let preds = apply_threshold(scores, t);
        let f1 = ConfusionMatrix::from_predictions(&preds, labels).metrics().f1;
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    best.0
}
