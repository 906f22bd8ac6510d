//! Patient tables: schema, CSV ingestion, descriptive statistics,
//! correlations and synthetic data.

mod correlation;
mod io;
mod schema;
mod stats;
mod synth;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use correlation::{correlation, fractional_ranks, CorrelationMatrix, CorrelationMethod};
pub use io::{load_csv, load_csv_filtered, read_csv, write_csv, RowRejection};
pub use schema::{
    FeatureKind, FeatureSchema, FeatureSpec, DEFAULT_SCHEMA_TOML, DELAYED_TARGET, EARLY_TARGET,
    ORDERED_CATEGORICALS, SCHEMA_VERSION,
};
pub use stats::{descriptive_stats, CategoryCount, FeatureStats, StatsTable};
pub use synth::{synth_generate, InformativeFeature, SynthConfig};

use crate::{Error, Result};

/// Which outcome a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Early,
    Delayed,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Early, Target::Delayed];

    pub fn column(self) -> &'static str {
        match self {
            Target::Early => EARLY_TARGET,
            Target::Delayed => DELAYED_TARGET,
        }
    }

    fn index(self) -> usize {
        match self {
            Target::Early => 0,
            Target::Delayed => 1,
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Target::Early => "early",
            Target::Delayed => "delayed",
        })
    }
}

/// A typed cell value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Number(f64),
    Flag(bool),
    Category { code: usize, label: &'a str },
}

impl Value<'_> {
    /// Numeric reading: flags as 0/1, categories by their label when it is a
    /// number, otherwise by code.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Number(x) => x,
            Value::Flag(b) => f64::from(u8::from(b)),
            Value::Category { code, label } => label.parse().unwrap_or(code as f64),
        }
    }
}

/// An immutable table of patient records.
///
/// Feature cells are stored column-major as `f64` with `NaN` marking a
/// missing value. Binary cells are 0/1 and categorical/ordinal cells hold the
/// category position in the schema. The two targets never contain missing
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    columns: Vec<Vec<f64>>,
    targets: [Vec<u8>; 2],
}

impl Dataset {
    /// Builds a dataset from raw columns, validating every cell against the
    /// schema.
    pub fn new(schema: FeatureSchema, columns: Vec<Vec<f64>>, targets: [Vec<u8>; 2]) -> Result<Self> {
        Dataset::from_shared(Arc::new(schema), columns, targets)
    }

    fn from_shared(
        schema: Arc<FeatureSchema>,
        columns: Vec<Vec<f64>>,
        targets: [Vec<u8>; 2],
    ) -> Result<Self> {
        if columns.len() != schema.n_features() {
            return Err(Error::contract(format!(
                "{} columns supplied for {} schema features",
                columns.len(),
                schema.n_features()
            )));
        }
        let n = targets[0].len();
        if targets[1].len() != n || columns.iter().any(|c| c.len() != n) {
            return Err(Error::contract("columns have unequal lengths"));
        }
        for (t, spec) in targets.iter().zip(schema.targets()) {
            if let Some(row) = t.iter().position(|&v| v > 1) {
                return Err(Error::RowRejected {
                    row,
                    reason: format!("{} must be 0 or 1", spec.name),
                });
            }
        }
        for (col, spec) in columns.iter().zip(schema.features()) {
            for (row, &v) in col.iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                check_cell(spec, v).map_err(|reason| Error::RowRejected { row, reason })?;
            }
        }
        Ok(Dataset {
            schema,
            columns,
            targets,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.targets[0].len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.schema.features().iter().map(|f| f.name.as_str()).collect()
    }

    /// Raw column `j` (NaN = missing, categories as codes).
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[f64]> {
        self.schema.feature_index(name).map(|j| self.column(j))
    }

    pub fn target(&self, target: Target) -> &[u8] {
        &self.targets[target.index()]
    }

    pub fn record(&self, row: usize) -> Record<'_> {
        assert!(row < self.n_rows(), "row {row} out of range");
        Record { data: self, row }
    }

    /// Rows `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| indices.iter().map(|&i| c[i]).collect())
            .collect();
        let targets = [
            indices.iter().map(|&i| self.targets[0][i]).collect(),
            indices.iter().map(|&i| self.targets[1][i]).collect(),
        ];
        Dataset {
            schema: Arc::clone(&self.schema),
            columns,
            targets,
        }
    }

    pub fn without_feature(&self, name: &str) -> Result<Dataset> {
        let j = self
            .schema
            .feature_index(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        let mut columns = self.columns.clone();
        columns.remove(j);
        Ok(Dataset {
            schema: Arc::new(self.schema.without_feature(j)),
            columns,
            targets: self.targets.clone(),
        })
    }

    pub fn with_feature(&self, spec: FeatureSpec, values: Vec<f64>) -> Result<Dataset> {
        if values.len() != self.n_rows() {
            return Err(Error::contract("appended column has the wrong length"));
        }
        let schema = self.schema.with_feature(spec)?;
        let mut columns = self.columns.clone();
        columns.push(values);
        Dataset::new(schema, columns, self.targets.clone())
    }
}

pub(crate) fn check_cell(spec: &FeatureSpec, v: f64) -> std::result::Result<(), String> {
    match &spec.kind {
        FeatureKind::Continuous { min, max } => {
            if !v.is_finite() || v < *min || v > *max {
                return Err(format!(
                    "{} = {v} outside allowed range [{min}, {max}]",
                    spec.name
                ));
            }
        }
        FeatureKind::Binary => {
            if v != 0.0 && v != 1.0 {
                return Err(format!("{} = {v} is not 0/1", spec.name));
            }
        }
        FeatureKind::Categorical { categories } | FeatureKind::Ordinal { categories } => {
            if v.fract() != 0.0 || v < 0.0 || v as usize >= categories.len() {
                return Err(format!("{}: category code {v} not in category set", spec.name));
            }
        }
    }
    Ok(())
}

/// Borrowed view of one patient record.
#[derive(Debug, Clone, Copy)]
pub struct Record<'a> {
    data: &'a Dataset,
    row: usize,
}

impl<'a> Record<'a> {
    pub fn row(&self) -> usize {
        self.row
    }

    /// `None` when the column is absent from the schema or the cell is missing.
    pub fn get(&self, name: &str) -> Option<Value<'a>> {
        let schema: &'a FeatureSchema = &self.data.schema;
        if let Some(j) = schema.feature_index(name) {
            let v = self.data.columns[j][self.row];
            if v.is_nan() {
                return None;
            }
            let spec = &schema.features()[j];
            return Some(match &spec.kind {
                FeatureKind::Continuous { .. } => Value::Number(v),
                FeatureKind::Binary => Value::Flag(v == 1.0),
                FeatureKind::Categorical { categories } | FeatureKind::Ordinal { categories } => {
                    let code = v as usize;
                    Value::Category {
                        code,
                        label: categories[code].as_str(),
                    }
                }
            });
        }
        Target::ALL
            .into_iter()
            .find(|t| t.column() == name)
            .map(|t| Value::Flag(self.data.target(t)[self.row] == 1))
    }
}
