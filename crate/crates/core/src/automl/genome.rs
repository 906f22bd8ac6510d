use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::ModelSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Imputer {
    /// Median for continuous columns, mode otherwise.
    Median,
    Zero,
    /// Median/mode plus a 0/1 missingness column per incomplete input.
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaler {
    None,
    Standardize,
    MinMax,
}

/// Keep every column, or the `m` columns with the highest single-split
/// information gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Selector {
    None,
    Top(usize),
}

impl fmt::Display for Imputer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Imputer::Median => "median",
            Imputer::Zero => "zero",
            Imputer::Indicator => "indicator",
        })
    }
}

impl FromStr for Imputer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median" => Ok(Imputer::Median),
            "zero" => Ok(Imputer::Zero),
            "indicator" => Ok(Imputer::Indicator),
            _ => Err(Error::Config(format!("unknown imputer `{s}`"))),
        }
    }
}

impl fmt::Display for Scaler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scaler::None => "none",
            Scaler::Standardize => "standardize",
            Scaler::MinMax => "minmax",
        })
    }
}

impl FromStr for Scaler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scaler::None),
            "standardize" => Ok(Scaler::Standardize),
            "minmax" => Ok(Scaler::MinMax),
            _ => Err(Error::Config(format!("unknown scaler `{s}`"))),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::None => f.write_str("none"),
            Selector::Top(m) => write!(f, "top:{m}"),
        }
    }
}

impl FromStr for Selector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(Selector::None);
        }
        s.strip_prefix("top:")
            .and_then(|m| m.parse().ok())
            .filter(|&m| m > 0)
            .map(Selector::Top)
            .ok_or_else(|| Error::Config(format!("unknown selector `{s}` (expected none or top:M)")))
    }
}

impl TryFrom<String> for Selector {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Selector> for String {
    fn from(s: Selector) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    DecisionTree,
    RandomForest,
    GradientBoosting,
}

impl Family {
    pub fn of(spec: &ModelSpec) -> Family {
        match spec {
            ModelSpec::DecisionTree { .. } => Family::DecisionTree,
            ModelSpec::RandomForest { .. } => Family::RandomForest,
            ModelSpec::GradientBoosting { .. } => Family::GradientBoosting,
        }
    }
}

fn depth_str(d: Option<usize>) -> String {
    d.map_or_else(|| "none".to_string(), |d| d.to_string())
}

/// Canonical text of a model gene, e.g. `gb(rounds=100,lr=0.1,depth=3)`.
pub fn model_to_string(spec: &ModelSpec) -> String {
    match *spec {
        ModelSpec::DecisionTree { max_depth, min_samples_leaf, prune } => format!(
            "dt(depth={},leaf={min_samples_leaf},prune={})",
            depth_str(max_depth),
            if prune { "on" } else { "off" }
        ),
        ModelSpec::RandomForest { n_trees, max_depth, min_samples_leaf } => format!(
            "rf(trees={n_trees},depth={},leaf={min_samples_leaf})",
            depth_str(max_depth)
        ),
        ModelSpec::GradientBoosting { n_rounds, learning_rate, max_depth } => {
            format!("gb(rounds={n_rounds},lr={learning_rate},depth={max_depth})")
        }
    }
}

pub fn model_from_str(s: &str) -> Result<ModelSpec> {
    let bad = || Error::Config(format!("malformed model gene `{s}`"));
    let (family, rest) = s.split_once('(').ok_or_else(bad)?;
    let body = rest.strip_suffix(')').ok_or_else(bad)?;
    let mut fields = std::collections::BTreeMap::new();
    for kv in body.split(',') {
        let (k, v) = kv.split_once('=').ok_or_else(bad)?;
        fields.insert(k, v);
    }
    let take = |k: &str| fields.get(k).copied().ok_or_else(bad);
    let int = |k: &str| take(k)?.parse::<usize>().map_err(|_| bad());
    let depth = |k: &str| -> Result<Option<usize>> {
        let v = take(k)?;
        if v == "none" {
            Ok(None)
        } else {
            v.parse().map(Some).map_err(|_| bad())
        }
    };
    let spec = match family {
        "dt" => ModelSpec::DecisionTree {
            max_depth: depth("depth")?,
            min_samples_leaf: int("leaf")?,
            prune: match take("prune")? {
                "on" => true,
                "off" => false,
                _ => return Err(bad()),
            },
        },
        "rf" => ModelSpec::RandomForest {
            n_trees: int("trees")?,
            max_depth: depth("depth")?,
            min_samples_leaf: int("leaf")?,
        },
        "gb" => ModelSpec::GradientBoosting {
            n_rounds: int("rounds")?,
            learning_rate: take("lr")?.parse().map_err(|_| bad())?,
            max_depth: int("depth")?,
        },
        _ => return Err(bad()),
    };
    if fields.len() != 3 {
        return Err(bad());
    }
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionTreeGrid {
    /// `0` stands for unlimited depth.
    pub max_depth: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub prune: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    /// `0` stands for unlimited depth.
    pub max_depth: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostingGrid {
    pub n_rounds: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
}

fn opt_depth(d: usize) -> Option<usize> {
    (d > 0).then_some(d)
}

/// Search space of pipeline genomes. Gene values are listed in declaration
/// order; the first value of every gene forms the default genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grammar {
    pub imputers: Vec<Imputer>,
    pub scalers: Vec<Scaler>,
    pub selectors: Vec<Selector>,
    pub decision_tree: Option<DecisionTreeGrid>,
    pub random_forest: Option<ForestGrid>,
    pub gradient_boosting: Option<BoostingGrid>,
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar {
            imputers: vec![Imputer::Median, Imputer::Zero, Imputer::Indicator],
            scalers: vec![Scaler::None, Scaler::Standardize, Scaler::MinMax],
            selectors: vec![Selector::None, Selector::Top(5), Selector::Top(10), Selector::Top(20)],
            decision_tree: Some(DecisionTreeGrid {
                max_depth: vec![3, 5, 8, 0],
                min_samples_leaf: vec![1, 5, 20],
                prune: vec![false, true],
            }),
            random_forest: Some(ForestGrid {
                n_trees: vec![50, 100],
                max_depth: vec![8, 0],
                min_samples_leaf: vec![1, 5],
            }),
            gradient_boosting: Some(BoostingGrid {
                n_rounds: vec![50, 100, 200],
                learning_rate: vec![0.05, 0.1, 0.3],
                max_depth: vec![2, 3],
            }),
        }
    }
}

impl Grammar {
    /// A grammar admitting exactly `genome`.
    pub fn singleton(genome: &PipelineGenome) -> Grammar {
        let mut g = Grammar {
            imputers: vec![genome.imputer],
            scalers: vec![genome.scaler],
            selectors: vec![genome.selector],
            decision_tree: None,
            random_forest: None,
            gradient_boosting: None,
        };
        match genome.model {
            ModelSpec::DecisionTree { max_depth, min_samples_leaf, prune } => {
                g.decision_tree = Some(DecisionTreeGrid {
                    max_depth: vec![max_depth.unwrap_or(0)],
                    min_samples_leaf: vec![min_samples_leaf],
                    prune: vec![prune],
                })
            }
            ModelSpec::RandomForest { n_trees, max_depth, min_samples_leaf } => {
                g.random_forest = Some(ForestGrid {
                    n_trees: vec![n_trees],
                    max_depth: vec![max_depth.unwrap_or(0)],
                    min_samples_leaf: vec![min_samples_leaf],
                })
            }
            ModelSpec::GradientBoosting { n_rounds, learning_rate, max_depth } => {
                g.gradient_boosting = Some(BoostingGrid {
                    n_rounds: vec![n_rounds],
                    learning_rate: vec![learning_rate],
                    max_depth: vec![max_depth],
                })
            }
        }
        g
    }

    pub fn validate(&self) -> Result<()> {
        if self.imputers.is_empty() || self.scalers.is_empty() || self.selectors.is_empty() {
            return Err(Error::Config("grammar: every preprocessing gene needs at least one value".into()));
        }
        let lens: Vec<(&str, usize)> = [
            self.decision_tree.as_ref().map(|g| {
                vec![("max_depth", g.max_depth.len()), ("min_samples_leaf", g.min_samples_leaf.len()), ("prune", g.prune.len())]
            }),
            self.random_forest.as_ref().map(|g| {
                vec![("n_trees", g.n_trees.len()), ("max_depth", g.max_depth.len()), ("min_samples_leaf", g.min_samples_leaf.len())]
            }),
            self.gradient_boosting.as_ref().map(|g| {
                vec![("n_rounds", g.n_rounds.len()), ("learning_rate", g.learning_rate.len()), ("max_depth", g.max_depth.len())]
            }),
        ]
        .into_iter()
        .flatten()
        .flatten()
        .collect();
        for (name, n) in &lens {
            if *n == 0 || *n > 4 {
                return Err(Error::Config(format!("grammar: {name} grid must have 1 to 4 values, got {n}")));
            }
        }
        if self.model_cells().is_empty() {
            return Err(Error::Config("grammar: no model family declared".into()));
        }
        for cell in self.model_cells() {
            match cell {
                ModelSpec::RandomForest { n_trees: 0, .. } => {
                    return Err(Error::Config("grammar: n_trees must be positive".into()))
                }
                ModelSpec::GradientBoosting { learning_rate, max_depth, .. }
                    if !(learning_rate > 0.0 && learning_rate <= 1.0) || max_depth == 0 =>
                {
                    return Err(Error::Config("grammar: learning_rate must lie in (0, 1] and depth be positive".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Every model cell, family by family, in lexicographic grid order.
    pub fn model_cells(&self) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        if let Some(g) = &self.decision_tree {
            for &d in &g.max_depth {
                for &l in &g.min_samples_leaf {
                    for &p in &g.prune {
                        out.push(ModelSpec::DecisionTree { max_depth: opt_depth(d), min_samples_leaf: l, prune: p });
                    }
                }
            }
        }
        if let Some(g) = &self.random_forest {
            for &t in &g.n_trees {
                for &d in &g.max_depth {
                    for &l in &g.min_samples_leaf {
                        out.push(ModelSpec::RandomForest { n_trees: t, max_depth: opt_depth(d), min_samples_leaf: l });
                    }
                }
            }
        }
        if let Some(g) = &self.gradient_boosting {
            for &r in &g.n_rounds {
                for &lr in &g.learning_rate {
                    for &d in &g.max_depth {
                        out.push(ModelSpec::GradientBoosting { n_rounds: r, learning_rate: lr, max_depth: d });
                    }
                }
            }
        }
        out
    }

    pub fn family_cells(&self, family: Family) -> Vec<ModelSpec> {
        self.model_cells().into_iter().filter(|c| Family::of(c) == family).collect()
    }

    pub fn default_genome(&self) -> PipelineGenome {
        PipelineGenome {
            imputer: self.imputers[0],
            scaler: self.scalers[0],
            selector: self.selectors[0],
            model: self.model_cells().swap_remove(0),
        }
    }

    pub fn contains(&self, g: &PipelineGenome) -> bool {
        self.imputers.contains(&g.imputer)
            && self.scalers.contains(&g.scaler)
            && self.selectors.contains(&g.selector)
            && self.model_cells().contains(&g.model)
    }

    pub fn random_genome(&self, rng: &mut impl Rng) -> PipelineGenome {
        PipelineGenome {
            imputer: *self.imputers.choose(rng).expect("non-empty"),
            scaler: *self.scalers.choose(rng).expect("non-empty"),
            selector: *self.selectors.choose(rng).expect("non-empty"),
            model: self.model_cells().choose(rng).expect("non-empty").clone(),
        }
    }
}

/// One preprocessing-plus-model pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PipelineGenome {
    pub imputer: Imputer,
    pub scaler: Scaler,
    pub selector: Selector,
    pub model: ModelSpec,
}

impl PipelineGenome {
    pub fn genes(&self) -> [String; 4] {
        [
            self.imputer.to_string(),
            self.scaler.to_string(),
            self.selector.to_string(),
            model_to_string(&self.model),
        ]
    }

    pub fn hamming(&self, other: &PipelineGenome) -> usize {
        self.genes().iter().zip(other.genes().iter()).filter(|(a, b)| a != b).count()
    }

    pub fn with_model(&self, model: ModelSpec) -> PipelineGenome {
        PipelineGenome { model, ..self.clone() }
    }
}

impl fmt::Display for PipelineGenome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "imputer={};scaler={};selector={};model={}",
            self.imputer,
            self.scaler,
            self.selector,
            model_to_string(&self.model)
        )
    }
}

impl FromStr for PipelineGenome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(';');
        let mut gene = |key: &str| -> Result<&str> {
            parts
                .next()
                .and_then(|p| p.strip_prefix(key))
                .and_then(|p| p.strip_prefix('='))
                .ok_or_else(|| Error::Config(format!("genome `{s}`: expected `{key}=` gene")))
        };
        let g = PipelineGenome {
            imputer: gene("imputer")?.parse()?,
            scaler: gene("scaler")?.parse()?,
            selector: gene("selector")?.parse()?,
            model: model_from_str(gene("model")?)?,
        };
        if parts.next().is_some() {
            return Err(Error::Config(format!("genome `{s}` has trailing genes")));
        }
        Ok(g)
    }
}

impl TryFrom<String> for PipelineGenome {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PipelineGenome> for String {
    fn from(g: PipelineGenome) -> String {
        g.to_string()
    }
}

fn pick_other<T: Clone + PartialEq>(options: &[T], current: &T, rng: &mut impl Rng) -> T {
    let others: Vec<&T> = options.iter().filter(|o| *o != current).collect();
    (*others.choose(rng).expect("at least one alternative")).clone()
}

/// Changes exactly one gene that has an alternative in `grammar`. A genome
/// from a singleton grammar is returned unchanged.
pub fn mutate(g: &PipelineGenome, grammar: &Grammar, rng: &mut impl Rng) -> PipelineGenome {
    let cells = grammar.model_cells();
    let mut mutable = Vec::new();
    if grammar.imputers.iter().any(|v| *v != g.imputer) {
        mutable.push(0);
    }
    if grammar.scalers.iter().any(|v| *v != g.scaler) {
        mutable.push(1);
    }
    if grammar.selectors.iter().any(|v| *v != g.selector) {
        mutable.push(2);
    }
    if cells.iter().any(|c| *c != g.model) {
        mutable.push(3);
    }
    let mut out = g.clone();
    match mutable.choose(rng) {
        Some(0) => out.imputer = pick_other(&grammar.imputers, &g.imputer, rng),
        Some(1) => out.scaler = pick_other(&grammar.scalers, &g.scaler, rng),
        Some(2) => out.selector = pick_other(&grammar.selectors, &g.selector, rng),
        Some(_) => out.model = pick_other(&cells, &g.model, rng),
        None => {}
    }
    out
}

/// Uniform crossover: each gene from `a` or `b` with equal probability.
pub fn crossover(a: &PipelineGenome, b: &PipelineGenome, rng: &mut impl Rng) -> PipelineGenome {
    PipelineGenome {
        imputer: if rng.random_bool(0.5) { a.imputer } else { b.imputer },
        scaler: if rng.random_bool(0.5) { a.scaler } else { b.scaler },
        selector: if rng.random_bool(0.5) { a.selector } else { b.selector },
        model: if rng.random_bool(0.5) { a.model.clone() } else { b.model.clone() },
    }
}
