use serde::{Deserialize, Serialize};

use super::schema::FeatureKind;
use super::{Dataset, Target};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub method: CorrelationMethod,
    pub names: Vec<String>,
    /// Row-major `names.len()` squared coefficients.
    pub values: Vec<f64>,
    /// Cells set to 0 because one side had no variance (or fewer than two
    /// complete pairs).
    pub degenerate: Vec<(usize, usize)>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim() + j]
    }

    pub fn by_name(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.get(i, j))
    }
}

/// Numeric encoding used for correlations: one column per feature.
///
/// Unordered categories are replaced by their frequency rank (0 = most
/// frequent, ties broken by declaration order); ordinal levels by position;
/// binaries by 0/1.
pub(crate) fn correlation_columns(d: &Dataset) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for (j, spec) in d.schema().features().iter().enumerate() {
        let col = d.column(j);
        let encoded = match &spec.kind {
            FeatureKind::Categorical { categories } => {
                let mut counts = vec![0usize; categories.len()];
                for &v in col.iter().filter(|v| !v.is_nan()) {
                    counts[v as usize] += 1;
                }
                let mut order: Vec<usize> = (0..categories.len()).collect();
                order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
                let mut rank = vec![0.0; categories.len()];
                for (r, &c) in order.iter().enumerate() {
                    rank[c] = r as f64;
                }
                col.iter()
                    .map(|&v| if v.is_nan() { v } else { rank[v as usize] })
                    .collect()
            }
            _ => col.to_vec(),
        };
        names.push(spec.name.clone());
        cols.push(encoded);
    }
    for t in Target::ALL {
        names.push(t.column().to_string());
        cols.push(d.target(t).iter().map(|&v| f64::from(v)).collect());
    }
    (names, cols)
}

/// Pairwise-complete correlation matrix over all features and both targets.
pub fn correlation(d: &Dataset, method: CorrelationMethod) -> Result<CorrelationMatrix> {
    if d.n_rows() < 2 {
        return Err(Error::contract("correlation needs at least two rows"));
    }
    let (names, cols) = correlation_columns(d);
    let p = names.len();
    let mut values = vec![0.0; p * p];
    let mut degenerate = Vec::new();
    let mut xs = Vec::with_capacity(d.n_rows());
    let mut ys = Vec::with_capacity(d.n_rows());
    for i in 0..p {
        for j in i..p {
            xs.clear();
            ys.clear();
            for (&a, &b) in cols[i].iter().zip(&cols[j]) {
                if !a.is_nan() && !b.is_nan() {
                    xs.push(a);
                    ys.push(b);
                }
            }
            let r = match method {
                CorrelationMethod::Pearson => pearson(&xs, &ys),
                CorrelationMethod::Spearman => pearson(&fractional_ranks(&xs), &fractional_ranks(&ys)),
            };
            let r = match r {
                Some(r) => r,
                None => {
                    degenerate.push((i, j));
                    if i != j {
                        degenerate.push((j, i));
                    }
                    0.0
                }
            };
            let r = if i == j && r != 0.0 { 1.0 } else { r };
            values[i * p + j] = r;
            values[j * p + i] = r;
        }
    }
    degenerate.sort_unstable();
    Ok(CorrelationMatrix {
        method,
        names,
        values,
        degenerate,
    })
}

/// `None` when fewer than two pairs or either side has zero variance.
pub(crate) fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share their average rank.
pub fn fractional_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}
