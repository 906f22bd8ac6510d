use super::tree::{NewtonCriterion, TreeBuilder};
use super::{sigmoid, DecisionTree, Matrix, Presorted, TreeEnsemble, TreeParams};

const LAMBDA: f64 = 1.0;
const MAX_HALVINGS: usize = 10;

pub(crate) fn log_loss(raw: &[f64], y: &[u8]) -> f64 {
    let total: f64 = raw
        .iter()
        .zip(y)
        .map(|(&s, &t)| {
            // log(1 + e^s) - t*s, computed stably
            let softplus = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
            softplus - f64::from(t) * s
        })
        .sum();
    total / raw.len() as f64
}

/// Newton-step gradient boosting on log-loss. A round whose tree would raise
/// the training loss has its leaf values halved until it does not; if that
/// fails the tree is dropped.
pub(crate) fn fit_boosted(
    x: &Matrix,
    y: &[u8],
    n_rounds: usize,
    learning_rate: f64,
    max_depth: usize,
    presorted: &Presorted,
) -> TreeEnsemble {
    let n = y.len();
    let rate = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
    let init = (rate / (1.0 - rate)).ln();
    let mut raw = vec![init; n];
    let weights = vec![1.0; n];
    let params = TreeParams {
        max_depth: Some(max_depth),
        min_samples_leaf: 1,
        max_features: None,
    };
    let mut trees = Vec::with_capacity(n_rounds);
    let mut loss = log_loss(&raw, y);
    let mut history = vec![loss];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..n_rounds {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let criterion = NewtonCriterion {
            grad: &grad,
            hess: &hess,
            lambda: LAMBDA,
        };
        let mut tree = TreeBuilder::new(x, &criterion, params, &weights, None).build(presorted);
        if tree.n_leaves() <= 1 && tree.root().value.abs() < 1e-15 {
            history.push(loss);
            continue;
        }
        let leaf_of: Vec<usize> = x.rows().map(|r| tree.leaf_index(r)).collect();
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = raw
                .iter()
                .zip(&leaf_of)
                .map(|(&s, &l)| s + learning_rate * tree.nodes[l].value)
                .collect();
            let new_loss = log_loss(&candidate, y);
            if new_loss <= loss {
                accepted = Some((candidate, new_loss));
                break;
            }
            halve_leaves(&mut tree);
        }
        if let Some((candidate, new_loss)) = accepted {
            raw = candidate;
            loss = new_loss;
            trees.push(tree);
        } else {
            log::debug!("boosting round dropped: no loss decrease after halving");
        }
        history.push(loss);
    }
    if trees.is_empty() {
        trees.push(DecisionTree::constant(0.0, n as f64));
    }
    let mut m = TreeEnsemble::boosted(trees, init, learning_rate, x.n_cols());
    m.training_loss = history;
    m
}

fn halve_leaves(tree: &mut DecisionTree) {
    for node in &mut tree.nodes {
        node.value *= 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn training_loss_never_increases() {
        for seed in 0..5 {
            let mut rng = crate::rng::stream(seed, 0);
            let rows: Vec<Vec<f64>> = (0..150)
                .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
                .collect();
            let y: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + 0.4 * rng.random::<f64>() > 0.6)).collect();
            let x = Matrix::from_rows(&rows);
            let m = fit_boosted(&x, &y, 60, 0.3, 3, &Presorted::new(&x));
            assert_eq!(m.training_loss.len(), 61);
            for w in m.training_loss.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
            }
            let raw: Vec<f64> = x.rows().map(|r| m.raw_output(r)).collect();
            assert!((log_loss(&raw, &y) - m.training_loss[60]).abs() < 1e-9);
        }
    }

    #[test]
    fn init_score_is_base_log_odds() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let m = fit_boosted(&x, &[0, 0, 0, 1], 0, 0.1, 2, &Presorted::new(&x));
        assert!((m.init_score - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((m.predict_proba(&[9.0]) - 0.25).abs() < 1e-12);
    }
}
