//! Tree induction, random forests, gradient boosting and cost-complexity
//! pruning for binary outcomes.

mod boosting;
mod prune;
mod tree;

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use prune::{ccp_alphas, prune, prune_at, PruneOutcome};
pub use tree::{information_gain, DecisionTree, Node, Presorted, Split, TreeParams};

use crate::{Error, Result};

/// Dense row-major design matrix; `NaN` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "matrix data has the wrong length");
        Matrix { n_rows, n_cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Matrix::new(rows.len(), n_cols, data)
    }

    /// Builds from column vectors of equal length.
    pub fn from_columns(cols: &[Vec<f64>], n_rows: usize) -> Self {
        let n_cols = cols.len();
        let mut data = vec![0.0; n_rows * n_cols];
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n_rows, "column {j} has the wrong length");
            for (i, &v) in c.iter().enumerate() {
                data[i * n_cols + j] = v;
            }
        }
        Matrix { n_rows, n_cols, data }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(idx.len(), self.n_cols, data)
    }
}

/// Model family and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    DecisionTree {
        max_depth: Option<usize>,
        min_samples_leaf: usize,
        /// Grow on 75% of the rows and cost-complexity prune on the rest.
        prune: bool,
    },
    RandomForest {
        n_trees: usize,
        max_depth: Option<usize>,
        min_samples_leaf: usize,
    },
    GradientBoosting {
        n_rounds: usize,
        learning_rate: f64,
        max_depth: usize,
    },
}

impl ModelSpec {
    pub fn default_forest() -> Self {
        ModelSpec::RandomForest {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
        }
    }

    pub fn default_boosting() -> Self {
        ModelSpec::GradientBoosting {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Single,
    Forest,
    Boosted,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A fitted tree model.
///
/// `Single` and `Forest` output the (mean) leaf positive rate. `Boosted`
/// outputs `sigmoid(init_score + learning_rate * sum of leaf scores)`; its
/// raw output is the pre-sigmoid score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub format_version: u32,
    pub kind: EnsembleKind,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
    pub learning_rate: f64,
    pub init_score: f64,
    /// Per-tree bootstrap/feature seeds (forests only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tree_seeds: Vec<u64>,
    /// Training log-loss after each boosting round, starting from the
    /// initial constant.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub training_loss: Vec<f64>,
    /// The training labels had a single class; the model is constant.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub constant: bool,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl TreeEnsemble {
    pub fn single(tree: DecisionTree, n_features: usize) -> Self {
        TreeEnsemble {
            format_version: MODEL_FORMAT_VERSION,
            kind: EnsembleKind::Single,
            n_features,
            trees: vec![tree],
            learning_rate: 1.0,
            init_score: 0.0,
            tree_seeds: Vec::new(),
            training_loss: Vec::new(),
            constant: false,
        }
    }

    pub fn forest(trees: Vec<DecisionTree>, n_features: usize) -> Self {
        TreeEnsemble {
            kind: EnsembleKind::Forest,
            trees,
            ..TreeEnsemble::single(DecisionTree::constant(0.0, 0.0), n_features)
        }
    }

    pub fn boosted(trees: Vec<DecisionTree>, init_score: f64, learning_rate: f64, n_features: usize) -> Self {
        TreeEnsemble {
            kind: EnsembleKind::Boosted,
            trees,
            init_score,
            learning_rate,
            ..TreeEnsemble::single(DecisionTree::constant(0.0, 0.0), n_features)
        }
    }

    /// Output in the space Shapley attributions are reported in: the
    /// probability for single trees and forests, the log-odds score for
    /// boosted models.
    pub fn raw_output(&self, x: &[f64]) -> f64 {
        match self.kind {
            EnsembleKind::Single => self.trees[0].predict(x),
            EnsembleKind::Forest => {
                self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
            }
            EnsembleKind::Boosted => {
                self.init_score
                    + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
            }
        }
    }

    /// Constant term and per-tree weight such that
    /// `raw_output = offset + sum(weight * tree.predict)`.
    pub fn linear_form(&self) -> (f64, f64) {
        match self.kind {
            EnsembleKind::Single => (0.0, 1.0),
            EnsembleKind::Forest => (0.0, 1.0 / self.trees.len() as f64),
            EnsembleKind::Boosted => (self.init_score, self.learning_rate),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let raw = self.raw_output(x);
        let p = match self.kind {
            EnsembleKind::Boosted => sigmoid(raw),
            _ => raw,
        };
        p.clamp(0.0, 1.0)
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_proba(r)).collect()
    }

    pub fn n_nodes(&self) -> usize {
        self.trees.iter().map(DecisionTree::n_nodes).sum()
    }

    /// Weighted entropy/Newton gain accumulated per feature over all splits,
    /// normalised to sum to one (all zero when there are no splits).
    pub fn split_gain_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_features];
        for t in &self.trees {
            for n in &t.nodes {
                if let Some(s) = &n.split {
                    // entropy gains are per unit weight, Newton gains are totals
                    let w = if self.kind == EnsembleKind::Boosted { 1.0 } else { n.count };
                    totals[s.feature] += s.gain.max(0.0) * w;
                }
            }
        }
        let sum: f64 = totals.iter().sum();
        if sum > 0.0 {
            totals.iter_mut().for_each(|v| *v /= sum);
        }
        totals
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TreeEnsemble = serde_json::from_str(text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        if m.trees.is_empty() {
            return Err(Error::Schema("model has no trees".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TreeEnsemble::from_json(&text)
    }
}

fn positive_rate(y: &[u8]) -> f64 {
    y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len().max(1) as f64
}

/// Fits `spec` on `x` / `y`. Deterministic for a fixed seed.
///
/// Single-class labels give a constant model (`constant = true`).
pub fn fit(x: &Matrix, y: &[u8], spec: &ModelSpec, seed: u64) -> Result<TreeEnsemble> {
    if x.n_rows() != y.len() {
        return Err(Error::contract("matrix rows and labels differ in length"));
    }
    if y.is_empty() {
        return Err(Error::contract("cannot fit on zero rows"));
    }
    let rate = positive_rate(y);
    if rate == 0.0 || rate == 1.0 {
        let mut m = TreeEnsemble::single(DecisionTree::constant(rate, y.len() as f64), x.n_cols());
        m.constant = true;
        return Ok(m);
    }
    let presorted = Presorted::new(x);
    let model = match *spec {
        ModelSpec::DecisionTree {
            max_depth,
            min_samples_leaf,
            prune: do_prune,
        } => {
            let params = TreeParams {
                max_depth,
                min_samples_leaf,
                max_features: None,
            };
            if do_prune && x.n_rows() >= 8 {
                let mut rng = crate::rng::stream(seed, 1);
                let (grow, hold) = stratified_holdout(y, 0.25, &mut rng);
                let mut w = vec![0.0; x.n_rows()];
                grow.iter().for_each(|&i| w[i] = 1.0);
                let tree = tree::fit_classification_tree(x, y, &w, params, &presorted, None);
                let hx = x.select_rows(&hold);
                let hy: Vec<u8> = hold.iter().map(|&i| y[i]).collect();
                let alphas = ccp_alphas(&tree);
                prune(&tree, &hx, &hy, &alphas).tree
            } else {
                let w = vec![1.0; x.n_rows()];
                tree::fit_classification_tree(x, y, &w, params, &presorted, None)
            }
            .pipe(|t| TreeEnsemble::single(t, x.n_cols()))
        }
        ModelSpec::RandomForest {
            n_trees,
            max_depth,
            min_samples_leaf,
        } => {
            if n_trees == 0 {
                return Err(Error::Config("random forest needs at least one tree".into()));
            }
            let max_features = ((x.n_cols() as f64).sqrt().ceil() as usize).max(1);
            let params = TreeParams {
                max_depth,
                min_samples_leaf,
                max_features: Some(max_features),
            };
            let seeds: Vec<u64> = (0..n_trees as u64).map(|i| crate::rng::derive_seed(seed, i)).collect();
            let trees: Vec<DecisionTree> = seeds
                .par_iter()
                .map(|&s| {
                    let mut rng = crate::rng::stream(s, 0);
                    let n = x.n_rows();
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[rng.random_range(0..n)] += 1.0;
                    }
                    tree::fit_classification_tree(x, y, &w, params, &presorted, Some(&mut rng))
                })
                .collect();
            let mut m = TreeEnsemble::forest(trees, x.n_cols());
            m.tree_seeds = seeds;
            m
        }
        ModelSpec::GradientBoosting {
            n_rounds,
            learning_rate,
            max_depth,
        } => {
            if !(learning_rate > 0.0 && learning_rate <= 1.0) {
                return Err(Error::Config("learning rate must lie in (0, 1]".into()));
            }
            boosting::fit_boosted(x, y, n_rounds, learning_rate, max_depth, &presorted)
        }
    };
    Ok(model)
}

/// Splits row indices into (grow, holdout) with roughly `frac` of each class
/// held out.
fn stratified_holdout(y: &[u8], frac: f64, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut grow = Vec::new();
    let mut hold = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        let k = ((idx.len() as f64) * frac).round() as usize;
        let k = k.min(idx.len().saturating_sub(1));
        hold.extend_from_slice(&idx[..k]);
        grow.extend_from_slice(&idx[k..]);
    }
    grow.sort_unstable();
    hold.sort_unstable();
    (grow, hold)
}

trait Pipe: Sized {
    fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
        f(self)
    }
}

impl<T> Pipe for T {}
