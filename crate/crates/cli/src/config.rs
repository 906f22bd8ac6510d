//! Run configuration: a TOML file with flat sections.

use std::path::{Path, PathBuf};

use ponv_core::automl::{EvolutionParams, Grammar, PipelineGenome};
use ponv_core::dataset::{SynthConfig, Target};
use ponv_core::evaluation::ProbabilityThreshold;
use ponv_core::scores::ScoreThreshold;
use ponv_core::splitter::BeeColonyParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    /// Generated in memory from the run seed instead of read from disk.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SynthConfig>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub splitter: SplitterSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
    #[serde(default)]
    pub explain: ExplainSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    /// Defaults to the bundled PONV roster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    /// Defaults to the bundled score factor table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    /// Drop rows that fail range/category checks instead of aborting.
    #[serde(default)]
    pub drop_invalid_rows: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Early,
    Delayed,
    Both,
}

impl Task {
    pub fn targets(self) -> Vec<Target> {
        match self {
            Task::Early => vec![Target::Early],
            Task::Delayed => vec![Target::Delayed],
            Task::Both => Target::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub task: Task,
    pub k: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            task: Task::Both,
            k: 5,
            seed: 0,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    Dbc,
    Random,
}

impl SplitMethod {
    pub fn name(self) -> &'static str {
        match self {
            SplitMethod::Dbc => "dbc",
            SplitMethod::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitterSection {
    pub method: SplitMethod,
    pub bee_colony: BeeColonyParams,
}

impl Default for SplitterSection {
    fn default() -> Self {
        SplitterSection {
            method: SplitMethod::Dbc,
            bee_colony: BeeColonyParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Evolve,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub mode: SearchMode,
    /// Used when `mode = "fixed"`; defaults to the grammar's first genome.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub genome: Option<String>,
    pub evolution: EvolutionParams,
    pub grammar: Grammar,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            mode: SearchMode::Evolve,
            genome: None,
            evolution: EvolutionParams::default(),
            grammar: Grammar::default(),
        }
    }
}

impl SearchSection {
    pub fn fixed_genome(&self) -> Result<PipelineGenome, CliError> {
        match &self.genome {
            Some(s) => s
                .parse()
                .map_err(|e| CliError::config("search.genome", format!("{e}"))),
            None => Ok(self.grammar.default_genome()),
        }
    }
}

/// `"fit"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cutoff<T> {
    Fixed(T),
    Named(FitTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitTag {
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    /// Integer score cut-off for the clinical baselines.
    pub score: Cutoff<u32>,
    /// Probability cut-off for the learned pipeline.
    pub probability: Cutoff<f64>,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        ThresholdSection {
            score: Cutoff::Named(FitTag::Fit),
            probability: Cutoff::Fixed(0.5),
        }
    }
}

impl ThresholdSection {
    pub fn score_policy(&self) -> ScoreThreshold {
        match self.score {
            Cutoff::Fixed(t) => ScoreThreshold::Fixed(t),
            Cutoff::Named(FitTag::Fit) => ScoreThreshold::Fit,
        }
    }

    pub fn probability_policy(&self) -> ProbabilityThreshold {
        match self.probability {
            Cutoff::Fixed(t) => ProbabilityThreshold::Fixed(t),
            Cutoff::Named(FitTag::Fit) => ProbabilityThreshold::Fit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub ablation: bool,
    pub shap: bool,
    /// Background rows for interventional SHAP (sampled without replacement).
    pub background: usize,
    /// Records attributed; 0 means all.
    pub records: usize,
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            ablation: true,
            shap: true,
            background: 100,
            records: 500,
        }
    }
}

/// A parsed config plus where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Directory relative data paths are resolved against.
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = RunConfig::from_toml_str(&text)?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(LoadedConfig { config, base_dir })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.data, &self.synthetic) {
            (None, None) => {
                return Err(CliError::config("data", "one of [data] or [synthetic] is required"))
            }
            (Some(_), Some(_)) => {
                return Err(CliError::config("data", "[data] and [synthetic] are mutually exclusive"))
            }
            _ => {}
        }
        if let Some(s) = &self.synthetic {
            s.validate()
                .map_err(|e| CliError::config("synthetic", core_message(e)))?;
        }
        if self.run.k < 2 {
            return Err(CliError::config("run.k", format!("must be at least 2, got {}", self.run.k)));
        }
        self.splitter
            .bee_colony
            .validate()
            .map_err(|e| CliError::config("splitter.bee_colony", core_message(e)))?;
        // stage seeds all derive from run.seed
        if self.splitter.bee_colony.seed != 0 {
            return Err(CliError::config("splitter.bee_colony.seed", "set run.seed instead"));
        }
        if self.search.evolution.seed != 0 {
            return Err(CliError::config("search.evolution.seed", "set run.seed instead"));
        }
        self.search
            .evolution
            .validate()
            .map_err(|e| CliError::config("search.evolution", core_message(e)))?;
        self.search
            .grammar
            .validate()
            .map_err(|e| CliError::config("search.grammar", core_message(e)))?;
        if self.search.mode == SearchMode::Fixed || self.search.genome.is_some() {
            self.search.fixed_genome()?;
        }
        if let Cutoff::Fixed(t) = self.thresholds.probability {
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::config("thresholds.probability", format!("must lie in [0, 1], got {t}")));
            }
        }
        if self.explain.shap && self.explain.background == 0 {
            return Err(CliError::config("explain.background", "must be positive"));
        }
        Ok(())
    }

    /// sha256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn core_message(e: ponv_core::Error) -> String {
    match e {
        ponv_core::Error::Config(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[synthetic]\nn = 100\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.run.k, 5);
        assert_eq!(cfg.run.task, Task::Both);
        assert_eq!(cfg.splitter.method, SplitMethod::Dbc);
        assert_eq!(cfg.thresholds.score_policy(), ScoreThreshold::Fit);
        assert_eq!(cfg.thresholds.probability_policy(), ProbabilityThreshold::Fixed(0.5));
        assert_eq!(cfg.synthetic.unwrap().n, 100);
    }

    #[test]
    fn thresholds_accept_numbers_or_fit() {
        let text = format!("{MINIMAL}[thresholds]\nscore = 2\nprobability = \"fit\"\n");
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.thresholds.score_policy(), ScoreThreshold::Fixed(2));
        assert_eq!(cfg.thresholds.probability_policy(), ProbabilityThreshold::Fit);
    }

    #[test]
    fn field_level_errors() {
        let cases = [
            (format!("{MINIMAL}[run]\nk = 1\n"), "run.k"),
            ("[run]\nk = 3\n".to_string(), "data"),
            (format!("{MINIMAL}[splitter.bee_colony]\ncolony_size = 0\n"), "splitter.bee_colony"),
            (format!("{MINIMAL}[search]\nmode = \"fixed\"\ngenome = \"garbage\"\n"), "search.genome"),
            (format!("{MINIMAL}[thresholds]\nprobability = 1.5\n"), "thresholds.probability"),
        ];
        for (text, field) in cases {
            match RunConfig::from_toml_str(&text) {
                Err(CliError::Field { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: expected a field error, got {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str(&format!("{MINIMAL}[run]\nfolds = 3\n")).unwrap_err();
        assert!(err.to_string().contains("folds"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_toml_str(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.run.seed = 9;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
