use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Column name of the early (in-PACU) outcome.
pub const EARLY_TARGET: &str = "PONV_PACU";
/// Column name of the delayed (first 24 h) outcome.
pub const DELAYED_TARGET: &str = "PONV_24H";

/// Columns whose categories carry an order and are coded by position.
pub const ORDERED_CATEGORICALS: [&str; 5] =
    ["ASA_CLASS", "APFEL_SCORE", "KOIV_SCORE", "GUID_RISK", "PONV_DRUGS"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous { min: f64, max: f64 },
    Binary,
    /// Unordered categories. Codes are positions in `categories`.
    Categorical { categories: Vec<String> },
    /// Ordered levels, lowest first. Codes are positions in `categories`.
    Ordinal { categories: Vec<String> },
}

impl FeatureKind {
    pub fn categories(&self) -> Option<&[String]> {
        match self {
            FeatureKind::Categorical { categories } | FeatureKind::Ordinal { categories } => {
                Some(categories)
            }
            _ => None,
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, FeatureKind::Continuous { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub target: bool,
}

impl FeatureSpec {
    pub fn continuous(name: &str, min: f64, max: f64) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Continuous { min, max },
            unit: None,
            description: None,
            target: false,
        }
    }

    pub fn binary(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Binary,
            unit: None,
            description: None,
            target: false,
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Categorical {
                categories: categories.iter().map(|s| s.to_string()).collect(),
            },
            unit: None,
            description: None,
            target: false,
        }
    }

    pub fn ordinal(name: &str, categories: &[&str]) -> Self {
        FeatureSpec {
            kind: FeatureKind::Ordinal {
                categories: categories.iter().map(|s| s.to_string()).collect(),
            },
            ..FeatureSpec::binary(name)
        }
    }

    pub fn target(name: &str) -> Self {
        FeatureSpec {
            target: true,
            ..FeatureSpec::binary(name)
        }
    }

    pub fn with_unit(mut self, unit: &str) -> Self {
        self.unit = Some(unit.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SchemaFile {
    version: u32,
    #[serde(rename = "feature")]
    entries: Vec<FeatureSpec>,
}

/// Ordered, validated list of column declarations.
///
/// Exactly two entries are targets ([`EARLY_TARGET`] and [`DELAYED_TARGET`]),
/// both binary. All other entries are features, kept in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
    targets: [FeatureSpec; 2],
}

impl FeatureSchema {
    /// Features are taken in order; `entries` must also contain both targets.
    pub fn new(entries: Vec<FeatureSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut features = Vec::new();
        let mut early = None;
        let mut delayed = None;
        for e in entries {
            if e.name.trim().is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(e.name.clone()) {
                return Err(Error::Schema(format!("duplicate column {}", e.name)));
            }
            match &e.kind {
                FeatureKind::Continuous { min, max } => {
                    if !(min.is_finite() && max.is_finite() && min <= max) {
                        return Err(Error::Schema(format!(
                            "{}: continuous range must be finite with min <= max",
                            e.name
                        )));
                    }
                }
                FeatureKind::Categorical { categories } | FeatureKind::Ordinal { categories } => {
                    if categories.is_empty() {
                        return Err(Error::Schema(format!("{}: empty category set", e.name)));
                    }
                    let uniq: HashSet<_> = categories.iter().collect();
                    if uniq.len() != categories.len() {
                        return Err(Error::Schema(format!("{}: duplicate category", e.name)));
                    }
                }
                FeatureKind::Binary => {}
            }
            let is_target_name = e.name == EARLY_TARGET || e.name == DELAYED_TARGET;
            if e.target || is_target_name {
                if !is_target_name {
                    return Err(Error::Schema(format!(
                        "{} marked as target; targets are {EARLY_TARGET} and {DELAYED_TARGET}",
                        e.name
                    )));
                }
                if e.kind != FeatureKind::Binary {
                    return Err(Error::Schema(format!("target {} must be binary", e.name)));
                }
                let mut t = e;
                t.target = true;
                if t.name == EARLY_TARGET {
                    early = Some(t);
                } else {
                    delayed = Some(t);
                }
            } else {
                features.push(e);
            }
        }
        let early = early.ok_or_else(|| Error::Schema(format!("missing target {EARLY_TARGET}")))?;
        let delayed =
            delayed.ok_or_else(|| Error::Schema(format!("missing target {DELAYED_TARGET}")))?;
        Ok(FeatureSchema {
            features,
            targets: [early, delayed],
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text)?;
        if file.version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                file.version
            )));
        }
        FeatureSchema::new(file.entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FeatureSchema::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = SchemaFile {
            version: SCHEMA_VERSION,
            entries: self.entries().cloned().collect(),
        };
        toml::to_string(&file).expect("schema serializes")
    }

    /// The schema mirroring the study's variable roster.
    pub fn ponv_default() -> Self {
        FeatureSchema::from_toml_str(DEFAULT_SCHEMA_TOML).expect("bundled schema is valid")
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn targets(&self) -> &[FeatureSpec; 2] {
        &self.targets
    }

    /// Features followed by the two targets.
    pub fn entries(&self) -> impl Iterator<Item = &FeatureSpec> {
        self.features.iter().chain(self.targets.iter())
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub(crate) fn without_feature(&self, index: usize) -> Self {
        let mut features = self.features.clone();
        features.remove(index);
        FeatureSchema {
            features,
            targets: self.targets.clone(),
        }
    }

    pub(crate) fn with_feature(&self, spec: FeatureSpec) -> Result<Self> {
        if self.entries().any(|e| e.name == spec.name) {
            return Err(Error::Schema(format!("duplicate column {}", spec.name)));
        }
        let mut features = self.features.clone();
        features.push(spec);
        Ok(FeatureSchema {
            features,
            targets: self.targets.clone(),
        })
    }
}

/// Bundled declaration file; also shipped as `config/ponv_schema.toml`.
pub const DEFAULT_SCHEMA_TOML: &str = include_str!("ponv_schema.toml");
