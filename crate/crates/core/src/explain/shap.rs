use rayon::prelude::*;
use serde::Serialize;

use crate::model::{DecisionTree, Matrix, TreeEnsemble};
use crate::{Error, Result};

pub const BRUTE_FORCE_MAX_FEATURES: usize = 15;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Owner {
    Free,
    Foreground,
    Background,
}

struct Walk<'a> {
    x: &'a [f64],
    z: &'a [f64],
    w: f64,
    owner: &'a mut [Owner],
    /// Features currently owned by x or z along the path.
    active: Vec<usize>,
    phi: &'a mut [f64],
}

/// Interventional Shapley values of one tree for foreground `x` against a
/// single background row `z`, added into `phi` with weight `w`.
fn tree_pair(tree: &DecisionTree, x: &[f64], z: &[f64], w: f64, owner: &mut [Owner], phi: &mut [f64]) {
    let mut st = Walk { x, z, w, owner, active: Vec::new(), phi };
    walk(tree, 0, (0, 0), &mut st);
}

fn walk(t: &DecisionTree, node: usize, counts: (usize, usize), st: &mut Walk<'_>) {
    let n = &t.nodes[node];
    let Some(s) = &n.split else {
        let (a, b) = counts;
        let v = st.w * n.value;
        if v == 0.0 || a + b == 0 {
            return;
        }
        let total = factorial(a + b);
        let plus = if a > 0 { v * factorial(a - 1) * factorial(b) / total } else { 0.0 };
        let minus = if b > 0 { v * factorial(a) * factorial(b - 1) / total } else { 0.0 };
        for &i in &st.active {
            match st.owner[i] {
                Owner::Foreground => st.phi[i] += plus,
                Owner::Background => st.phi[i] -= minus,
                Owner::Free => {}
            }
        }
        return;
    };
    let f = s.feature;
    let cx = s.child(st.x[f]);
    let cz = s.child(st.z[f]);
    match st.owner[f] {
        Owner::Foreground => walk(t, cx, counts, st),
        Owner::Background => walk(t, cz, counts, st),
        Owner::Free if cx == cz => walk(t, cx, counts, st),
        Owner::Free => {
            st.active.push(f);
            st.owner[f] = Owner::Foreground;
            walk(t, cx, (counts.0 + 1, counts.1), st);
            st.owner[f] = Owner::Background;
            walk(t, cz, (counts.0, counts.1 + 1), st);
            st.owner[f] = Owner::Free;
            st.active.pop();
        }
    }
}

/// Exact interventional Shapley values of `m.raw_output` at `x`, averaged
/// over the background rows. Boosted models are explained in log-odds
/// space, single trees and forests in probability space.
pub fn shap_tree(m: &TreeEnsemble, x: &[f64], background: &Matrix) -> Result<Vec<f64>> {
    if background.n_rows() == 0 {
        return Err(Error::contract("SHAP needs a non-empty background set"));
    }
    if x.len() != m.n_features || background.n_cols() != m.n_features {
        return Err(Error::contract("record width differs from the model's feature count"));
    }
    let (_, weight) = m.linear_form();
    let mut phi = vec![0.0; m.n_features];
    let mut owner = vec![Owner::Free; m.n_features];
    for z in background.rows() {
        for t in &m.trees {
            tree_pair(t, x, z, weight, &mut owner, &mut phi);
        }
    }
    let nb = background.n_rows() as f64;
    phi.iter_mut().for_each(|v| *v /= nb);
    Ok(phi)
}

/// Mean raw output over the background rows.
pub fn base_value(m: &TreeEnsemble, background: &Matrix) -> f64 {
    background.rows().map(|z| m.raw_output(z)).sum::<f64>() / background.n_rows() as f64
}

/// Shapley values by enumerating all 2^p coalitions; features outside a
/// coalition take the values of each background row in turn.
pub fn shap_brute(model: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &Matrix) -> Result<Vec<f64>> {
    let p = x.len();
    if p > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::contract(format!(
            "brute-force Shapley values support at most {BRUTE_FORCE_MAX_FEATURES} features, got {p}"
        )));
    }
    if background.n_rows() == 0 || background.n_cols() != p {
        return Err(Error::contract("background must be non-empty and as wide as the record"));
    }
    let value = |mask: usize| -> f64 {
        let mut hybrid = vec![0.0; p];
        let mut total = 0.0;
        for z in background.rows() {
            for j in 0..p {
                hybrid[j] = if mask >> j & 1 == 1 { x[j] } else { z[j] };
            }
            total += model(&hybrid);
        }
        total / background.n_rows() as f64
    };
    let values: Vec<f64> = (0..1usize << p).map(value).collect();
    let pf = factorial(p);
    let mut phi = vec![0.0; p];
    for (i, out) in phi.iter_mut().enumerate() {
        for mask in 0..1usize << p {
            if mask >> i & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = factorial(s) * factorial(p - s - 1) / pf;
            *out += w * (values[mask | 1 << i] - values[mask]);
        }
    }
    Ok(phi)
}

/// Attributions of many records, with features ordered by mean |value|.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapMatrix {
    /// Feature names, most important first.
    pub features: Vec<String>,
    /// Column index of each ordered feature in the model's input.
    pub order: Vec<usize>,
    pub mean_abs: Vec<f64>,
    /// `values[r][j]` is record `r`'s attribution to `features[j]`.
    pub values: Vec<Vec<f64>>,
    /// Input values matching `values`, for beeswarm plots.
    pub feature_values: Vec<Vec<f64>>,
    pub base_value: f64,
}

pub fn shap_summary(m: &TreeEnsemble, x: &Matrix, background: &Matrix, names: &[String]) -> Result<ShapMatrix> {
    if names.len() != m.n_features {
        return Err(Error::contract("one name per model feature is required"));
    }
    let rows: Vec<Vec<f64>> = (0..x.n_rows())
        .into_par_iter()
        .map(|r| shap_tree(m, x.row(r), background))
        .collect::<Result<_>>()?;
    let p = m.n_features;
    let mut mean_abs = vec![0.0; p];
    for r in &rows {
        for (acc, v) in mean_abs.iter_mut().zip(r) {
            *acc += v.abs();
        }
    }
    if !rows.is_empty() {
        mean_abs.iter_mut().for_each(|v| *v /= rows.len() as f64);
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| mean_abs[b].total_cmp(&mean_abs[a]).then(a.cmp(&b)));
    Ok(ShapMatrix {
        features: order.iter().map(|&j| names[j].clone()).collect(),
        mean_abs: order.iter().map(|&j| mean_abs[j]).collect(),
        values: rows.iter().map(|r| order.iter().map(|&j| r[j]).collect()).collect(),
        feature_values: (0..x.n_rows()).map(|i| order.iter().map(|&j| x.get(i, j)).collect()).collect(),
        base_value: base_value(m, background),
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fit, ModelSpec, Node, Split};
    use proptest::prelude::*;
    use rand::Rng;

    fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> DecisionTree {
        DecisionTree {
            nodes: vec![
                Node { count: 2.0, value: 0.5 * (left + right), split: Some(Split { feature, threshold, left: 1, right: 2, missing_left: true, gain: 1.0 }) },
                Node { count: 1.0, value: left, split: None },
                Node { count: 1.0, value: right, split: None },
            ],
        }
    }

    fn random_problem(seed: u64, p: usize, n: usize) -> (Matrix, Vec<u8>) {
        let mut rng = crate::rng::stream(seed, 0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| f64::from(rng.random_range(0..5u8))).collect())
            .collect();
        let y = rows.iter().map(|r| u8::from(r[0] + r[p - 1] + rng.random_range(0.0..3.0) > 5.0)).collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn single_feature_stump() {
        let m = TreeEnsemble::single(stump(1, 0.5, 0.2, 0.9), 3);
        let bg = Matrix::from_rows(&[vec![0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let x = [5.0, 1.0, -3.0];
        let phi = shap_tree(&m, &x, &bg).unwrap();
        assert_eq!(phi[0], 0.0);
        assert_eq!(phi[2], 0.0);
        assert!((phi[1] - (0.9 - base_value(&m, &bg))).abs() < 1e-15);
    }

    #[test]
    fn record_equal_to_background_gets_zero() {
        let (x, y) = random_problem(3, 4, 80);
        let m = fit(&x, &y, &ModelSpec::default_boosting(), 1).unwrap();
        let bg = Matrix::from_rows(&[x.row(7).to_vec()]);
        assert!(shap_tree(&m, x.row(7), &bg).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetry_and_dummy_axioms() {
        // f = 1 if x0 > 0.5 and x1 > 0.5, symmetric in features 0 and 1; feature 2 unused
        let tree = DecisionTree {
            nodes: vec![
                Node { count: 4.0, value: 0.25, split: Some(Split { feature: 0, threshold: 0.5, left: 1, right: 2, missing_left: true, gain: 0.3 }) },
                Node { count: 2.0, value: 0.0, split: None },
                Node { count: 2.0, value: 0.5, split: Some(Split { feature: 1, threshold: 0.5, left: 3, right: 4, missing_left: true, gain: 0.5 }) },
                Node { count: 1.0, value: 0.0, split: None },
                Node { count: 1.0, value: 1.0, split: None },
            ],
        };
        let m = TreeEnsemble::single(tree, 3);
        let bg = Matrix::from_rows(&[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let x = [1.0, 1.0, 7.0];
        let f = |r: &[f64]| m.raw_output(r);
        let brute = shap_brute(&f, &x, &bg).unwrap();
        let fast = shap_tree(&m, &x, &bg).unwrap();
        assert!((brute[0] - brute[1]).abs() < 1e-12);
        assert_eq!(brute[2], 0.0);
        assert_eq!(fast[2], 0.0);
        for j in 0..3 {
            assert!((brute[j] - fast[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_three_tree_matches_enumeration() {
        let (x, y) = random_problem(17, 6, 120);
        let m = fit(&x, &y, &ModelSpec::DecisionTree { max_depth: Some(3), min_samples_leaf: 1, prune: false }, 0).unwrap();
        let bg = x.select_rows(&[0, 1, 2, 3, 4]);
        let f = |r: &[f64]| m.raw_output(r);
        for i in 10..20 {
            let fast = shap_tree(&m, x.row(i), &bg).unwrap();
            let brute = shap_brute(&f, x.row(i), &bg).unwrap();
            for j in 0..6 {
                assert!((fast[j] - brute[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn too_many_features_for_brute_force() {
        let bg = Matrix::from_rows(&[vec![0.0; 16]]);
        assert!(shap_brute(&|_| 0.0, &[0.0; 16], &bg).is_err());
    }

    #[test]
    fn summary_orders_by_mean_abs() {
        let m = TreeEnsemble::forest(vec![stump(1, 0.5, 0.0, 1.0), stump(1, 0.5, 0.0, 1.0), stump(0, 0.5, 0.4, 0.6)], 2);
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
        let names = vec!["A".to_string(), "B".to_string()];
        let s = shap_summary(&m, &x, &x, &names).unwrap();
        assert_eq!(s.features, vec!["B", "A"]);
        assert!(s.mean_abs[0] >= s.mean_abs[1]);
        assert_eq!(s, shap_summary(&m, &x, &x, &names).unwrap());
        let constant = TreeEnsemble::single(DecisionTree::constant(0.3, 3.0), 2);
        let z = shap_summary(&constant, &x, &x, &names).unwrap();
        assert!(z.values.iter().flatten().all(|&v| v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn efficiency_holds(seed in any::<u64>(), boosted in any::<bool>()) {
            let (x, y) = random_problem(seed, 5, 90);
            let spec = if boosted {
                ModelSpec::GradientBoosting { n_rounds: 20, learning_rate: 0.3, max_depth: 3 }
            } else {
                ModelSpec::RandomForest { n_trees: 8, max_depth: Some(4), min_samples_leaf: 1 }
            };
            let m = fit(&x, &y, &spec, seed).unwrap();
            let bg = x.select_rows(&[0, 5, 9, 13]);
            let base = base_value(&m, &bg);
            for i in 20..25 {
                let phi = shap_tree(&m, x.row(i), &bg).unwrap();
                prop_assert!((base + phi.iter().sum::<f64>() - m.raw_output(x.row(i))).abs() < 1e-9);
            }
        }
    }
}
