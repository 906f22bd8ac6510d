use super::{DecisionTree, Matrix, Node};

/// Result of holdout-selected cost-complexity pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub tree: DecisionTree,
    pub alpha: f64,
    pub holdout_accuracy: f64,
    /// The holdout set was empty and the tree is returned unchanged.
    pub skipped: bool,
}

fn node_risk(n: &Node) -> f64 {
    n.count * n.value.min(1.0 - n.value)
}

/// (subtree risk, leaf count) for every node of the current tree.
fn subtree_costs(nodes: &[Node]) -> Vec<(f64, usize)> {
    fn go(nodes: &[Node], i: usize, out: &mut [(f64, usize)]) -> (f64, usize) {
        let c = match &nodes[i].split {
            None => (node_risk(&nodes[i]), 1),
            Some(s) => {
                let (ra, la) = go(nodes, s.left, out);
                let (rb, lb) = go(nodes, s.right, out);
                (ra + rb, la + lb)
            }
        };
        out[i] = c;
        c
    }
    let mut out = vec![(0.0, 0); nodes.len()];
    go(nodes, 0, &mut out);
    out
}

/// Reachable internal nodes and their weakest-link strength g(t).
fn link_strengths(nodes: &[Node]) -> Vec<(usize, f64)> {
    let costs = subtree_costs(nodes);
    let mut out = Vec::new();
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        if let Some(s) = &nodes[i].split {
            let (r_sub, leaves) = costs[i];
            let g = ((node_risk(&nodes[i]) - r_sub) / (leaves - 1) as f64).max(0.0);
            out.push((i, g));
            stack.push(s.left);
            stack.push(s.right);
        }
    }
    out
}

fn collapse_weakest(nodes: &mut [Node]) -> Option<f64> {
    let links = link_strengths(nodes);
    let min = links.iter().map(|&(_, g)| g).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let tol = 1e-12 * min.abs().max(1.0);
    for (i, g) in links {
        if g <= min + tol {
            nodes[i].split = None;
        }
    }
    Some(min)
}

/// Drops unreachable nodes and renumbers children.
fn compact(nodes: &[Node]) -> DecisionTree {
    fn go(src: &[Node], i: usize, dst: &mut Vec<Node>) -> usize {
        let id = dst.len();
        dst.push(Node {
            split: None,
            ..src[i].clone()
        });
        if let Some(s) = &src[i].split {
            let left = go(src, s.left, dst);
            let right = go(src, s.right, dst);
            let mut s = s.clone();
            s.left = left;
            s.right = right;
            dst[id].split = Some(s);
        }
        id
    }
    let mut dst = Vec::new();
    go(nodes, 0, &mut dst);
    DecisionTree { nodes: dst }
}

/// Effective alphas of the weakest-link pruning sequence, starting at 0.
pub fn ccp_alphas(tree: &DecisionTree) -> Vec<f64> {
    let mut nodes = tree.nodes.clone();
    let mut alphas = vec![0.0];
    while let Some(a) = collapse_weakest(&mut nodes) {
        let last = *alphas.last().expect("non-empty");
        alphas.push(a.max(last));
    }
    alphas.dedup();
    alphas
}

/// Smallest subtree minimising R(T) + alpha * |leaves|.
pub fn prune_at(tree: &DecisionTree, alpha: f64) -> DecisionTree {
    let mut nodes = tree.nodes.clone();
    loop {
        let links = link_strengths(&nodes);
        let min = links.iter().map(|&(_, g)| g).fold(f64::INFINITY, f64::min);
        // an empty link set folds to +inf and stops too
        if min > alpha + 1e-12 * alpha.abs().max(1.0) {
            break;
        }
        collapse_weakest(&mut nodes);
    }
    compact(&nodes)
}

fn accuracy(tree: &DecisionTree, x: &Matrix, y: &[u8]) -> f64 {
    let hits = x
        .rows()
        .zip(y)
        .filter(|(r, &t)| u8::from(tree.predict(r) >= 0.5) == t)
        .count();
    hits as f64 / y.len() as f64
}

/// Picks the alpha (from `alphas`, or the full pruning path when empty) whose
/// pruned tree classifies the holdout best; ties go to the smaller tree.
pub fn prune(tree: &DecisionTree, holdout_x: &Matrix, holdout_y: &[u8], alphas: &[f64]) -> PruneOutcome {
    if holdout_y.is_empty() {
        return PruneOutcome {
            tree: tree.clone(),
            alpha: 0.0,
            holdout_accuracy: f64::NAN,
            skipped: true,
        };
    }
    let path;
    let grid = if alphas.is_empty() {
        path = ccp_alphas(tree);
        &path
    } else {
        alphas
    };
    let mut best: Option<PruneOutcome> = None;
    for &alpha in grid {
        let t = prune_at(tree, alpha);
        let acc = accuracy(&t, holdout_x, holdout_y);
        let better = best.as_ref().is_none_or(|b| {
            acc > b.holdout_accuracy || (acc == b.holdout_accuracy && t.n_nodes() < b.tree.n_nodes())
        });
        if better {
            best = Some(PruneOutcome {
                tree: t,
                alpha,
                holdout_accuracy: acc,
                skipped: false,
            });
        }
    }
    best.expect("grid has at least one alpha")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Presorted, TreeParams};
    use proptest::prelude::*;
    use rand::Rng;

    fn grow(rows: &[Vec<f64>], y: &[u8]) -> DecisionTree {
        let x = Matrix::from_rows(rows);
        let w = vec![1.0; y.len()];
        crate::model::tree::fit_classification_tree(&x, y, &w, TreeParams::default(), &Presorted::new(&x), None)
    }

    fn cost(t: &DecisionTree, alpha: f64) -> f64 {
        t.leaves().map(node_risk).sum::<f64>() + alpha * t.n_leaves() as f64
    }

    #[test]
    fn pure_noise_prunes_to_root() {
        let mut rng = crate::rng::stream(31, 0);
        let gen = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
            let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.2))).collect();
            (rows, y)
        };
        let (rows, y) = gen(&mut rng, 300);
        let (hr, hy) = gen(&mut rng, 2000);
        let tree = grow(&rows, &y);
        assert!(tree.n_nodes() > 20);
        let out = prune(&tree, &Matrix::from_rows(&hr), &hy, &[]);
        assert_eq!(out.tree.n_nodes(), 1);
        assert!(!out.skipped);
    }

    #[test]
    fn empty_holdout_is_flagged() {
        let tree = grow(&[vec![0.0], vec![1.0]], &[0, 1]);
        let out = prune(&tree, &Matrix::from_rows(&[]), &[], &[]);
        assert!(out.skipped);
        assert_eq!(out.tree, tree);
    }

    #[test]
    fn alpha_zero_keeps_useful_splits() {
        let tree = grow(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], &[0, 0, 1, 1]);
        assert_eq!(prune_at(&tree, 0.0), tree);
        let alphas = ccp_alphas(&tree);
        assert_eq!(alphas, vec![0.0, 2.0]);
        assert_eq!(prune_at(&tree, 2.0).n_nodes(), 1);
    }

    #[test]
    fn tree_that_fits_the_holdout_is_left_alone() {
        let rows = [vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]];
        let tree = grow(&rows, &[0, 0, 0, 1, 1, 1]);
        let holdout = Matrix::from_rows(&[vec![0.5], vec![2.2], vec![3.7], vec![4.9]]);
        let out = prune(&tree, &holdout, &[0, 0, 1, 1], &ccp_alphas(&tree));
        assert_eq!(out.tree, tree);
        assert_eq!(out.holdout_accuracy, 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn pruned_trees_shrink_and_are_optimal_on_path(
            seed in 0u64..10_000, alpha in 0.0f64..5.0,
        ) {
            let mut rng = crate::rng::stream(seed, 0);
            let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random_range(0..8) as f64, rng.random()]).collect();
            let y: Vec<u8> = (0..60).map(|_| u8::from(rng.random_bool(0.4))).collect();
            let tree = grow(&rows, &y);
            let pruned = prune_at(&tree, alpha);
            prop_assert!(pruned.n_nodes() <= tree.n_nodes());
            let total: f64 = pruned.leaves().map(|n| n.count).sum();
            prop_assert!((total - 60.0).abs() < 1e-9);
            // no tree on the weakest-link path has lower penalised cost
            for a in ccp_alphas(&tree) {
                let other = prune_at(&tree, a);
                prop_assert!(cost(&pruned, alpha) <= cost(&other, alpha) + 1e-9);
            }
        }
    }
}
