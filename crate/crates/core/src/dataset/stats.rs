use std::io::Write;

use serde::Serialize;

use super::schema::{FeatureKind, FeatureSpec};
use super::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCount {
    pub label: String,
    pub count: usize,
    /// Share of non-missing values, in percent.
    pub percentage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureStats {
    Continuous {
        n: usize,
        min: f64,
        max: f64,
        mean: f64,
        /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
        sd: f64,
        median: f64,
    },
    Categorical {
        n: usize,
        categories: Vec<CategoryCount>,
    },
    /// Every value of the column is missing.
    NoData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub name: String,
    pub stats: FeatureStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsTable {
    pub total_rows: usize,
    pub features: Vec<FeatureSummary>,
}

impl StatsTable {
    pub fn get(&self, name: &str) -> Option<&FeatureStats> {
        self.features.iter().find(|f| f.name == name).map(|f| &f.stats)
    }

    /// One row per continuous feature, one row per category otherwise.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "feature", "kind", "n", "min", "max", "mean", "sd", "median", "category", "count",
            "percentage",
        ])?;
        for f in &self.features {
            match &f.stats {
                FeatureStats::Continuous {
                    n,
                    min,
                    max,
                    mean,
                    sd,
                    median,
                } => w.write_record([
                    f.name.clone(),
                    "continuous".into(),
                    n.to_string(),
                    min.to_string(),
                    max.to_string(),
                    mean.to_string(),
                    sd.to_string(),
                    median.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?,
                FeatureStats::Categorical { n, categories } => {
                    for c in categories {
                        w.write_record([
                            f.name.clone(),
                            "categorical".into(),
                            n.to_string(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            c.label.clone(),
                            c.count.to_string(),
                            c.percentage.to_string(),
                        ])?;
                    }
                }
                FeatureStats::NoData => {
                    let mut rec = vec![f.name.clone(), "no_data".into(), "0".into()];
                    rec.resize(11, String::new());
                    w.write_record(rec)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Per-feature summaries over non-missing values, targets last.
pub fn descriptive_stats(d: &Dataset) -> Result<StatsTable> {
    if d.n_rows() == 0 {
        return Err(Error::contract("descriptive statistics need at least one row"));
    }
    let mut features: Vec<FeatureSummary> = d
        .schema()
        .features()
        .iter()
        .enumerate()
        .map(|(j, spec)| FeatureSummary {
            name: spec.name.clone(),
            stats: column_stats(spec, d.column(j)),
        })
        .collect();
    for (t, spec) in super::Target::ALL.iter().zip(d.schema().targets()) {
        let col: Vec<f64> = d.target(*t).iter().map(|&v| f64::from(v)).collect();
        features.push(FeatureSummary {
            name: spec.name.clone(),
            stats: column_stats(spec, &col),
        });
    }
    Ok(StatsTable {
        total_rows: d.n_rows(),
        features,
    })
}

fn column_stats(spec: &FeatureSpec, col: &[f64]) -> FeatureStats {
    let mut present: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
    if present.is_empty() {
        return FeatureStats::NoData;
    }
    let n = present.len();
    let labels: Vec<String> = match &spec.kind {
        FeatureKind::Continuous { .. } => {
            // Welford
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for (i, &x) in present.iter().enumerate() {
                let delta = x - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (x - mean);
            }
            let sd = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
            present.sort_by(f64::total_cmp);
            let median = if n % 2 == 1 {
                present[n / 2]
            } else {
                0.5 * (present[n / 2 - 1] + present[n / 2])
            };
            return FeatureStats::Continuous {
                n,
                min: present[0],
                max: present[n - 1],
                mean,
                sd,
                median,
            };
        }
        FeatureKind::Binary => vec!["0".into(), "1".into()],
        FeatureKind::Categorical { categories } | FeatureKind::Ordinal { categories } => {
            categories.clone()
        }
    };
    let mut counts = vec![0usize; labels.len()];
    for &v in &present {
        counts[v as usize] += 1;
    }
    let categories = labels
        .into_iter()
        .zip(counts)
        .map(|(label, count)| CategoryCount {
            label,
            count,
            percentage: 100.0 * count as f64 / n as f64,
        })
        .collect();
    FeatureStats::Categorical { n, categories }
}
