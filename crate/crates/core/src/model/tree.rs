use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Values `<= threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Direction taken by a missing value: the child that received more
    /// training weight.
    pub missing_left: bool,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Training weight that reached this node.
    pub count: f64,
    /// Output if this node is (or is collapsed into) a leaf: the positive
    /// rate for classification trees, the leaf score for boosting trees.
    pub value: f64,
    pub split: Option<Split>,
}

/// Binary tree stored as a flat node list with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl Split {
    #[inline]
    pub fn goes_left(&self, v: f64) -> bool {
        if v.is_nan() {
            self.missing_left
        } else {
            v <= self.threshold
        }
    }

    #[inline]
    pub fn child(&self, v: f64) -> usize {
        if self.goes_left(v) {
            self.left
        } else {
            self.right
        }
    }
}

impl DecisionTree {
    pub fn constant(value: f64, count: f64) -> Self {
        DecisionTree {
            nodes: vec![Node {
                count,
                value,
                split: None,
            }],
        }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = s.child(x[s.feature]);
        }
        i
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].value
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i].split {
                None => 0,
                Some(s) => 1 + go(t, s.left).max(go(t, s.right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.split.is_none())
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

/// Per-feature row orderings of the non-missing cells, computed once per
/// matrix and shared by every tree fitted on it.
pub struct Presorted {
    orders: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let orders = (0..x.n_cols())
            .map(|f| {
                let mut rows: Vec<u32> = (0..x.n_rows() as u32)
                    .filter(|&r| !x.get(r as usize, f).is_nan())
                    .collect();
                rows.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)));
                rows
            })
            .collect();
        Presorted { orders }
    }
}

/// Sufficient statistics of a set of rows under some split criterion.
pub(crate) trait Criterion {
    type Stats: Copy + Default;

    fn row(&self, row: usize, weight: f64) -> Self::Stats;
    fn add(a: &mut Self::Stats, b: &Self::Stats);
    fn sub(a: &Self::Stats, b: &Self::Stats) -> Self::Stats;
    fn weight(s: &Self::Stats) -> f64;
    fn gain(&self, parent: &Self::Stats, left: &Self::Stats, right: &Self::Stats) -> f64;
    fn leaf_value(&self, s: &Self::Stats) -> f64;
    /// Node cannot be improved by any split.
    fn is_pure(&self, s: &Self::Stats) -> bool;
    fn min_gain(&self) -> f64;
}

fn entropy(w: f64, pos: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let p = pos / w;
    let mut h = 0.0;
    for q in [p, 1.0 - p] {
        if q > 0.0 {
            h -= q * q.log2();
        }
    }
    h
}

/// Information gain (entropy reduction, bits) for 0/1 labels.
pub(crate) struct EntropyCriterion<'a> {
    pub labels: &'a [u8],
}

impl Criterion for EntropyCriterion<'_> {
    type Stats = [f64; 2];

    #[inline]
    fn row(&self, row: usize, weight: f64) -> [f64; 2] {
        [weight, weight * f64::from(self.labels[row])]
    }

    #[inline]
    fn add(a: &mut [f64; 2], b: &[f64; 2]) {
        a[0] += b[0];
        a[1] += b[1];
    }

    #[inline]
    fn sub(a: &[f64; 2], b: &[f64; 2]) -> [f64; 2] {
        [a[0] - b[0], a[1] - b[1]]
    }

    #[inline]
    fn weight(s: &[f64; 2]) -> f64 {
        s[0]
    }

    fn gain(&self, parent: &[f64; 2], left: &[f64; 2], right: &[f64; 2]) -> f64 {
        information_gain(*parent, *left, *right)
    }

    fn leaf_value(&self, s: &[f64; 2]) -> f64 {
        if s[0] > 0.0 {
            (s[1] / s[0]).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    fn is_pure(&self, s: &[f64; 2]) -> bool {
        s[1] <= 0.0 || s[1] >= s[0]
    }

    fn min_gain(&self) -> f64 {
        // splits with zero gain are allowed (an impure node keeps splitting)
        -1e-12
    }
}

/// Entropy reduction of splitting `parent` (weight, positives) into two parts.
pub fn information_gain(parent: [f64; 2], left: [f64; 2], right: [f64; 2]) -> f64 {
    let w = parent[0];
    if w <= 0.0 {
        return 0.0;
    }
    entropy(parent[0], parent[1])
        - left[0] / w * entropy(left[0], left[1])
        - right[0] / w * entropy(right[0], right[1])
}

/// Second-order (Newton) gain on log-loss gradients.
pub(crate) struct NewtonCriterion<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub lambda: f64,
}

impl Criterion for NewtonCriterion<'_> {
    /// weight, gradient sum, hessian sum
    type Stats = [f64; 3];

    #[inline]
    fn row(&self, row: usize, weight: f64) -> [f64; 3] {
        [weight, weight * self.grad[row], weight * self.hess[row]]
    }

    #[inline]
    fn add(a: &mut [f64; 3], b: &[f64; 3]) {
        a[0] += b[0];
        a[1] += b[1];
        a[2] += b[2];
    }

    #[inline]
    fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    #[inline]
    fn weight(s: &[f64; 3]) -> f64 {
        s[0]
    }

    fn gain(&self, parent: &[f64; 3], left: &[f64; 3], right: &[f64; 3]) -> f64 {
        let score = |s: &[f64; 3]| s[1] * s[1] / (s[2] + self.lambda);
        0.5 * (score(left) + score(right) - score(parent))
    }

    fn leaf_value(&self, s: &[f64; 3]) -> f64 {
        -s[1] / (s[2] + self.lambda)
    }

    fn is_pure(&self, s: &[f64; 3]) -> bool {
        s[2] <= 1e-12
    }

    fn min_gain(&self) -> f64 {
        1e-12
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    missing_left: bool,
    gain: f64,
}

pub(crate) struct TreeBuilder<'a, C: Criterion> {
    x: &'a Matrix,
    criterion: &'a C,
    params: TreeParams,
    rng: Option<&'a mut ChaCha8Rng>,
    weights: &'a [f64],
    nodes: Vec<Node>,
    side: Vec<bool>,
}

impl<'a, C: Criterion> TreeBuilder<'a, C> {
    pub(crate) fn new(
        x: &'a Matrix,
        criterion: &'a C,
        params: TreeParams,
        weights: &'a [f64],
        rng: Option<&'a mut ChaCha8Rng>,
    ) -> Self {
        TreeBuilder {
            x,
            criterion,
            params,
            rng,
            weights,
            nodes: Vec::new(),
            side: vec![false; x.n_rows()],
        }
    }

    pub(crate) fn build(mut self, presorted: &Presorted) -> DecisionTree {
        let rows: Vec<u32> = (0..self.x.n_rows() as u32)
            .filter(|&r| self.weights[r as usize] > 0.0)
            .collect();
        let sorted: Vec<Vec<u32>> = presorted
            .orders
            .iter()
            .map(|o| o.iter().copied().filter(|&r| self.weights[r as usize] > 0.0).collect())
            .collect();
        self.grow(rows, sorted, 0);
        DecisionTree { nodes: self.nodes }
    }

    fn stats_of(&self, rows: &[u32]) -> C::Stats {
        let mut s = C::Stats::default();
        for &r in rows {
            C::add(&mut s, &self.criterion.row(r as usize, self.weights[r as usize]));
        }
        s
    }

    fn grow(&mut self, rows: Vec<u32>, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let total = self.stats_of(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node {
            count: C::weight(&total),
            value: self.criterion.leaf_value(&total),
            split: None,
        });
        let min_leaf = self.params.min_samples_leaf.max(1) as f64;
        if self.params.max_depth.is_some_and(|d| depth >= d)
            || C::weight(&total) < 2.0 * min_leaf
            || self.criterion.is_pure(&total)
        {
            return id;
        }
        let Some(best) = self.best_split(&total, &sorted, min_leaf) else {
            return id;
        };

        let f = best.feature;
        for &r in &rows {
            let v = self.x.get(r as usize, f);
            self.side[r as usize] = if v.is_nan() { best.missing_left } else { v <= best.threshold };
        }
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            rows.iter().partition(|&&r| self.side[r as usize]);
        let mut left_sorted = Vec::with_capacity(sorted.len());
        let mut right_sorted = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&r| self.side[r as usize]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        drop(rows);
        let left = self.grow(left_rows, left_sorted, depth + 1);
        let right = self.grow(right_rows, right_sorted, depth + 1);
        self.nodes[id].split = Some(Split {
            feature: f,
            threshold: best.threshold,
            left,
            right,
            missing_left: best.missing_left,
            gain: best.gain,
        });
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.n_cols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut f: Vec<usize> = sample(rng, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(
        &mut self,
        total: &C::Stats,
        sorted: &[Vec<u32>],
        min_leaf: f64,
    ) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for f in self.candidate_features() {
            let list = &sorted[f];
            if list.len() < 2 {
                continue;
            }
            let known = self.stats_of(list);
            let missing = C::sub(total, &known);
            let has_missing = C::weight(&missing) > 0.0;
            let mut left = C::Stats::default();
            for i in 0..list.len() - 1 {
                let r = list[i] as usize;
                C::add(&mut left, &self.criterion.row(r, self.weights[r]));
                let v = self.x.get(r, f);
                let next = self.x.get(list[i + 1] as usize, f);
                if next <= v {
                    continue;
                }
                let mut l = left;
                let mut rt = C::sub(&known, &left);
                let missing_left = C::weight(&l) >= C::weight(&rt);
                if has_missing {
                    if missing_left {
                        C::add(&mut l, &missing);
                    } else {
                        C::add(&mut rt, &missing);
                    }
                }
                if C::weight(&l) < min_leaf || C::weight(&rt) < min_leaf {
                    continue;
                }
                let gain = self.criterion.gain(total, &l, &rt);
                if gain < self.criterion.min_gain() {
                    continue;
                }
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        missing_left,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Grows an entropy-split classification tree on rows with positive weight.
pub fn fit_classification_tree(
    x: &Matrix,
    labels: &[u8],
    weights: &[f64],
    params: TreeParams,
    presorted: &Presorted,
    rng: Option<&mut ChaCha8Rng>,
) -> DecisionTree {
    let criterion = EntropyCriterion { labels };
    TreeBuilder::new(x, &criterion, params, weights, rng).build(presorted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(x: &Matrix, y: &[u8], params: TreeParams) -> DecisionTree {
        let w = vec![1.0; x.n_rows()];
        fit_classification_tree(x, y, &w, params, &Presorted::new(x), None)
    }

    fn accuracy(t: &DecisionTree, x: &Matrix, y: &[u8]) -> f64 {
        let hits = (0..x.n_rows())
            .filter(|&i| u8::from(t.predict(x.row(i)) >= 0.5) == y[i])
            .count();
        hits as f64 / y.len() as f64
    }

    #[test]
    fn separable_stump() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![10.0], vec![11.0]]);
        let y = [0, 0, 0, 1, 1];
        let t = fit(&x, &y, TreeParams::default());
        assert_eq!(t.depth(), 1);
        assert_eq!(accuracy(&t, &x, &y), 1.0);
        assert_eq!(t.nodes[0].split.as_ref().unwrap().threshold, 6.5);
    }

    #[test]
    fn xor_needs_depth_two() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i & 1), f64::from((i >> 1) & 1)]).collect();
        let y: Vec<u8> = rows.iter().map(|r| (r[0] as u8) ^ (r[1] as u8)).collect();
        let x = Matrix::from_rows(&rows);
        let deep = fit(&x, &y, TreeParams { max_depth: Some(2), ..TreeParams::default() });
        assert_eq!(accuracy(&deep, &x, &y), 1.0);
        let stump = fit(&x, &y, TreeParams { max_depth: Some(1), ..TreeParams::default() });
        assert!(accuracy(&stump, &x, &y) <= 0.5);
    }

    #[test]
    fn missing_values_follow_heavier_child() {
        let x = Matrix::from_rows(&[
            vec![1.0], vec![2.0], vec![3.0], vec![8.0], vec![f64::NAN],
        ]);
        let y = [0, 0, 0, 1, 0];
        let t = fit(&x, &y, TreeParams { max_depth: Some(1), ..TreeParams::default() });
        let s = t.nodes[0].split.as_ref().unwrap();
        assert!(s.missing_left);
        assert_eq!(t.predict(&[f64::NAN]), 0.0);
    }

    #[test]
    fn leaf_counts_sum_to_n() {
        let rows: Vec<Vec<f64>> = (0..37).map(|i| vec![f64::from(i * 7 % 11), f64::from(i % 5)]).collect();
        let y: Vec<u8> = (0..37).map(|i| u8::from(i % 3 == 0)).collect();
        let x = Matrix::from_rows(&rows);
        let t = fit(&x, &y, TreeParams { min_samples_leaf: 2, ..TreeParams::default() });
        let total: f64 = t.leaves().map(|n| n.count).sum();
        assert_eq!(total, 37.0);
        assert!(t.leaves().all(|n| n.count >= 2.0 && (0.0..=1.0).contains(&n.value)));
    }

    #[test]
    fn chosen_threshold_maximises_gain_on_its_feature() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![f64::from((i * 13) % 17), f64::from((i * 7) % 5)])
            .collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from((i * 13) % 17 > 9 || i % 4 == 0)).collect();
        let x = Matrix::from_rows(&rows);
        let t = fit(&x, &y, TreeParams { max_depth: Some(1), ..TreeParams::default() });
        let s = t.nodes[0].split.as_ref().unwrap();
        let mut vals: Vec<f64> = (0..30).map(|i| x.get(i, s.feature)).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let parent = [30.0, y.iter().map(|&v| f64::from(v)).sum()];
        for w in vals.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            let mut l = [0.0, 0.0];
            for (i, &yi) in y.iter().enumerate().take(30) {
                if x.get(i, s.feature) <= thr {
                    l[0] += 1.0;
                    l[1] += f64::from(yi);
                }
            }
            let r = [parent[0] - l[0], parent[1] - l[1]];
            assert!(s.gain >= information_gain(parent, l, r) - 1e-12);
        }
    }
}
