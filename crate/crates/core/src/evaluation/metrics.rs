use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Cells that were defined as 0 because their denominator vanished.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFlags {
    pub empty: bool,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

impl MetricFlags {
    pub fn any(&self) -> bool {
        self.empty || self.precision_undefined || self.recall_undefined || self.f1_undefined
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub flags: MetricFlags,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    /// Predictions and labels are 0/1.
    pub fn from_predictions(predictions: &[u8], labels: &[u8]) -> Self {
        assert_eq!(predictions.len(), labels.len(), "predictions and labels differ in length");
        let mut c = ConfusionMatrix::default();
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p != 0, y != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> Metrics {
        metrics(self)
    }
}

fn ratio(num: u64, den: u64, undefined: &mut bool) -> f64 {
    if den == 0 {
        *undefined = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, recall, precision and F1. Zero denominators yield 0 plus a flag.
pub fn metrics(c: &ConfusionMatrix) -> Metrics {
    let mut flags = MetricFlags::default();
    let accuracy = ratio(c.tp + c.tn, c.total(), &mut flags.empty);
    let recall = ratio(c.tp, c.tp + c.fn_, &mut flags.recall_undefined);
    let precision = ratio(c.tp, c.tp + c.fp, &mut flags.precision_undefined);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        flags.f1_undefined = true;
        0.0
    };
    Metrics {
        accuracy,
        recall,
        precision,
        f1,
        flags,
    }
}
