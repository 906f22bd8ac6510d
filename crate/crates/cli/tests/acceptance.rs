//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are constants below.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use ponv_cli::config::{LoadedConfig, RunConfig};
use ponv_cli::stages::{self, Context};
use ponv_core::automl::{FixedPipeline, PipelineGenome};
use ponv_core::dataset::{
    synth_generate, Dataset, FeatureSchema, FeatureSpec, InformativeFeature, SynthConfig, Target, DELAYED_TARGET,
    EARLY_TARGET,
};
use ponv_core::evaluation::{anova_oneway, auc, metrics, roc_curve, ConfusionMatrix};
use ponv_core::explain::{ablation_importance, base_value, shap_brute, shap_tree};
use ponv_core::model::{ccp_alphas, fit, prune, Matrix, ModelSpec, TreeEnsemble};
use ponv_core::rng::stream;
use ponv_core::splitter::{dbc_optimize, random_partition, random_partition_n, BeeColonyParams, Partition};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

const AUC_TOL: f64 = 1e-12;
const SHAP_TOL: f64 = 1e-9;
const ANOVA_F_TOL: f64 = 1e-9;
const ANOVA_P_TOL: f64 = 1e-6;
const IMPORTANCE_SUM_TOL: f64 = 1e-9;
const SPLIT_OPT_SLACK: f64 = 0.05;
const NOISE_ZEROED_SHARE: f64 = 0.90;
const E2E_MIN_ACCURACY: f64 = 0.85;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let t0 = Instant::now();
    let mut o = f();
    let took = t0.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            o.pass = false;
            o.detail = format!("{}; took {:.1}s > {:.0}s", o.detail, took.as_secs_f64(), limit.as_secs_f64());
        }
    }
    (o, took)
}

// ----------------------------------------------------------------- metrics

fn metric_oracle() -> Outcome {
    // 50 matrices: all (tp, fp, tn, fn) in {0,1,3}^4 minus the empty one,
    // first 50 in lexicographic order, plus their hand-derived values.
    let vals = [0u64, 1, 3];
    let mut cases = Vec::new();
    for &tp in &vals {
        for &fp in &vals {
            for &tn in &vals {
                for &fn_ in &vals {
                    if tp + fp + tn + fn_ > 0 {
                        cases.push((tp, fp, tn, fn_));
                    }
                }
            }
        }
    }
    cases.truncate(50);
    let mut bad = Vec::new();
    for &(tp, fp, tn, fn_) in &cases {
        let m = metrics(&ConfusionMatrix::new(tp, fp, tn, fn_));
        let frac = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let acc = frac(tp + tn, tp + fp + tn + fn_);
        let rec = frac(tp, tp + fn_);
        let prec = frac(tp, tp + fp);
        let f1 = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
        let flags_ok = m.flags.recall_undefined == (tp + fn_ == 0)
            && m.flags.precision_undefined == (tp + fp == 0)
            && m.flags.f1_undefined == (tp == 0);
        if m.accuracy != acc || m.recall != rec || m.precision != prec || m.f1 != f1 || !flags_ok {
            bad.push(format!("{tp}/{fp}/{tn}/{fn_}"));
        }
    }

    // AUC: trapezoid over the ROC polyline against a pairwise
    // Mann-Whitney count (ties weigh 1/2).
    let mut rng = stream(101, 0);
    let mut worst = 0.0f64;
    let mut auc_cases = 0;
    while auc_cases < 1000 {
        let n = rng.random_range(2..60);
        let levels = rng.random_range(2..12);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / 7.0).collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        let pos = labels.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == n {
            continue;
        }
        let mut wins = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] == 1 && labels[j] == 0 {
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        let oracle = wins / (pos * (n - pos)) as f64;
        let trap = roc_curve(&scores, &labels).unwrap().auc;
        let rank = auc(&scores, &labels).unwrap();
        worst = worst.max((trap - rank).abs()).max((trap - oracle).abs());
        auc_cases += 1;
    }
    outcome(
        bad.is_empty() && worst <= AUC_TOL,
        format!(
            "{} matrices ({} mismatched), {auc_cases} AUC cases, max |trapezoid - rank| {worst:.2e} (tol {AUC_TOL:.0e})",
            cases.len(),
            bad.len()
        ),
    )
}

// ----------------------------------------------------------------- splitter

fn age_sex_dataset(ages: &[f64], sexes: &[u8]) -> Dataset {
    let schema = FeatureSchema::new(vec![
        FeatureSpec::continuous("AGE", 18.0, 120.0),
        FeatureSpec::categorical("GENDER", &["female", "male"]),
        FeatureSpec::target(EARLY_TARGET),
        FeatureSpec::target(DELAYED_TARGET),
    ])
    .unwrap();
    let n = ages.len();
    Dataset::new(
        schema,
        vec![ages.to_vec(), sexes.iter().map(|&s| f64::from(s)).collect()],
        [vec![0; n], vec![0; n]],
    )
    .unwrap()
}

/// Independent cohort distance for k = 2: L1 between the two normalised
/// (decade-from-18 x sex) histograms.
fn bipartition_distance(ages: &[f64], sexes: &[u8], in_first: &[bool]) -> f64 {
    let mut h = [[0.0f64; 18]; 2];
    let mut sizes = [0.0f64; 2];
    for i in 0..ages.len() {
        let bin = (((ages[i] - 18.0) / 10.0).floor() as usize).min(8);
        let c = usize::from(!in_first[i]);
        h[c][bin * 2 + usize::from(sexes[i])] += 1.0;
        sizes[c] += 1.0;
    }
    (0..18).map(|j| (h[0][j] / sizes[0] - h[1][j] / sizes[1]).abs()).sum()
}

fn invariants_hold(p: &Partition, n: usize) -> bool {
    let sizes = p.sizes();
    let balanced = sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1;
    let mut seen = vec![0u32; n];
    for cohort in p.cohorts() {
        for i in cohort {
            seen[i] += 1;
        }
    }
    balanced && seen.iter().all(|&c| c == 1) && p.check_invariants().is_ok()
}

fn splitter() -> Outcome {
    let synth = SynthConfig { n: 2000, noise_features: 0, ..SynthConfig::default() };
    let d = synth_generate(&synth, 77).unwrap();
    let dbc = dbc_optimize(&d, 5, &BeeColonyParams { seed: 3, ..BeeColonyParams::default() }).unwrap();
    let random_mean = (0..100).map(|s| random_partition(&d, 5, s).unwrap().objective()).sum::<f64>() / 100.0;
    let mut ok = dbc.objective <= random_mean && invariants_hold(&dbc.partition, d.n_rows());

    let mut rng = stream(55, 0);
    let mut worst_ratio = 0.0f64;
    let instances = 20;
    for inst in 0..instances {
        let ages: Vec<f64> = (0..10).map(|_| f64::from(rng.random_range(18..98))).collect();
        let sexes: Vec<u8> = (0..10).map(|_| rng.random_range(0..2)).collect();
        let small = age_sex_dataset(&ages, &sexes);
        let mut best = f64::INFINITY;
        for mask in 0u32..1024 {
            if mask.count_ones() == 5 {
                let in_first: Vec<bool> = (0..10).map(|i| mask >> i & 1 == 1).collect();
                best = best.min(bipartition_distance(&ages, &sexes, &in_first));
            }
        }
        let out = dbc_optimize(&small, 2, &BeeColonyParams { seed: inst, ..BeeColonyParams::default() }).unwrap();
        let in_first: Vec<bool> = out.partition.assignment().iter().map(|&c| c == 0).collect();
        let achieved = bipartition_distance(&ages, &sexes, &in_first);
        ok &= (achieved - out.objective).abs() < 1e-12;
        ok &= achieved <= best * (1.0 + SPLIT_OPT_SLACK) + 1e-12;
        ok &= invariants_hold(&out.partition, 10);
        if best > 0.0 {
            worst_ratio = worst_ratio.max(achieved / best);
        } else if achieved > 0.0 {
            worst_ratio = f64::INFINITY;
        }
    }
    outcome(
        ok,
        format!(
            "n=2000 k=5: DBC {:.4} vs random mean {random_mean:.4}; n=10 k=2: worst DBC/optimum {:.4} over {instances} instances (slack {SPLIT_OPT_SLACK})",
            dbc.objective,
            worst_ratio.max(1.0)
        ),
    )
}

// ----------------------------------------------------------------- SHAP

fn random_model(rng: &mut impl Rng, case: u64) -> (TreeEnsemble, Matrix) {
    let p = rng.random_range(1..=15);
    let n = 80;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| f64::from(rng.random_range(0..6)) + rng.random::<f64>()).collect())
        .collect();
    let y: Vec<u8> = x
        .iter()
        .map(|r| u8::from(r[0] + r.get(1).copied().unwrap_or(0.0) * 0.5 + rng.random::<f64>() * 3.0 > 4.5))
        .collect();
    let spec = match case % 3 {
        0 => ModelSpec::DecisionTree { max_depth: Some(rng.random_range(1..=5)), min_samples_leaf: 1, prune: false },
        1 => ModelSpec::RandomForest { n_trees: rng.random_range(1..=4), max_depth: Some(rng.random_range(1..=4)), min_samples_leaf: 2 },
        _ => ModelSpec::GradientBoosting { n_rounds: rng.random_range(1..=4), learning_rate: 0.3, max_depth: rng.random_range(1..=3) },
    };
    let model = fit(&Matrix::from_rows(&x), &y, &spec, case).unwrap();
    (model, Matrix::from_rows(&x))
}

fn shap() -> Outcome {
    let mut rng = stream(202, 0);
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let (m, x) = random_model(&mut rng, case);
        let bg_rows: Vec<usize> = (0..4).map(|_| rng.random_range(0..x.n_rows())).collect();
        let bg = x.select_rows(&bg_rows);
        let record = x.row(rng.random_range(0..x.n_rows())).to_vec();
        let fast = shap_tree(&m, &record, &bg).unwrap();
        let slow = shap_brute(&|r: &[f64]| m.raw_output(r), &record, &bg).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }

    // efficiency on a trained ensemble
    let d = synth_generate(&SynthConfig { n: 1500, clinical_columns: false, ..SynthConfig::default() }, 9).unwrap();
    let columns: Vec<Vec<f64>> = (0..d.n_features()).map(|j| d.column(j).to_vec()).collect();
    let x = Matrix::from_columns(&columns, d.n_rows());
    let spec = ModelSpec::GradientBoosting { n_rounds: 40, learning_rate: 0.1, max_depth: 3 };
    let m = fit(&x, d.target(Target::Early), &spec, 1).unwrap();
    let bg = x.select_rows(&(0..100).map(|i| i * 15).collect::<Vec<_>>());
    let base = base_value(&m, &bg);
    let mut eff = 0.0f64;
    for r in 0..1000 {
        let row = x.row(r);
        let phi = shap_tree(&m, row, &bg).unwrap();
        eff = eff.max((base + phi.iter().sum::<f64>() - m.raw_output(row)).abs());
    }
    outcome(
        worst <= SHAP_TOL && eff <= SHAP_TOL,
        format!("200 models: max |tree - brute| {worst:.2e}; 1000 records: max efficiency gap {eff:.2e} (tol {SHAP_TOL:.0e})"),
    )
}

// ----------------------------------------------------------------- ablation

fn ablation() -> Outcome {
    let cfg = SynthConfig {
        n: 2000,
        prevalence: 0.4,
        informative: (1..=5)
            .map(|i| InformativeFeature { name: format!("SIGNAL_{i}"), mean: 0.0, sd: 1.0, coefficient: 1.5 })
            .collect(),
        noise_features: 20,
        clinical_columns: false,
        missing_rate: 0.0,
        ..SynthConfig::default()
    };
    let d = synth_generate(&cfg, 31).unwrap();
    let genome: PipelineGenome =
        "imputer=median;scaler=none;selector=top:5;model=gb(rounds=60,lr=0.1,depth=2)".parse().unwrap();
    let p = random_partition_n(d.n_rows(), 5, 8).unwrap();
    let v = ablation_importance(&FixedPipeline(genome), &d, &p, Target::Early, 4).unwrap();
    let get = |name: &str| v.importance[v.features.iter().position(|f| f == name).unwrap()];
    let informative_nonzero = (1..=5).filter(|i| get(&format!("SIGNAL_{i}")) > 0.0).count();
    let noise_zeroed = (1..=20).filter(|i| get(&format!("NOISE_{i:02}")) == 0.0).count();
    let sum: f64 = v.importance.iter().sum();
    outcome(
        informative_nonzero == 5
            && noise_zeroed as f64 >= NOISE_ZEROED_SHARE * 20.0
            && (sum - 1.0).abs() <= IMPORTANCE_SUM_TOL,
        format!(
            "informative nonzero {informative_nonzero}/5, noise zeroed {noise_zeroed}/20, sum {sum:.12} (noise delta {:.4})",
            v.noise_delta
        ),
    )
}

// ----------------------------------------------------------------- ANOVA

fn anova() -> Outcome {
    let mut rng = stream(303, 0);
    let mut worst_f = 0.0f64;
    let mut worst_p = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(2..=6);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let shift = rng.random_range(-1.0..1.0);
                let normal = Normal::new(shift, rng.random_range(0.5..2.0)).unwrap();
                (0..rng.random_range(2..=25)).map(|_| normal.sample(&mut rng)).collect()
            })
            .collect();
        // textbook form: SSB = sum(T_i^2 / n_i) - T^2 / N, SSW = SST - SSB
        let n: f64 = groups.iter().map(|g| g.len() as f64).sum();
        let total: f64 = groups.iter().flatten().sum();
        let sum_sq: f64 = groups.iter().flatten().map(|v| v * v).sum();
        let ssb: f64 = groups.iter().map(|g| g.iter().sum::<f64>().powi(2) / g.len() as f64).sum::<f64>() - total * total / n;
        let sst = sum_sq - total * total / n;
        let (df1, df2) = ((k - 1) as f64, n - k as f64);
        let f = (ssb / df1) / ((sst - ssb) / df2);
        let p = FisherSnedecor::new(df1, df2).unwrap().sf(f);
        let r = anova_oneway(&groups).unwrap();
        worst_f = worst_f.max((r.f - f).abs() / f.abs().max(1.0));
        worst_p = worst_p.max((r.p - p).abs());
    }
    let same = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0], vec![2.0, 3.0, 1.0]]).unwrap();
    let flat = anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0, 2.0]]).unwrap();
    let edges = same.p == 1.0 && same.f == 0.0 && flat.p == 0.0 && flat.infinite_f;
    outcome(
        worst_f <= ANOVA_F_TOL && worst_p <= ANOVA_P_TOL && edges,
        format!(
            "100 sets: max rel F err {worst_f:.2e} (tol {ANOVA_F_TOL:.0e}), max p err {worst_p:.2e} (tol {ANOVA_P_TOL:.0e}); identical groups p={}, zero within-variance p={}",
            same.p, flat.p
        ),
    )
}

// ----------------------------------------------------------------- model

fn model_sanity() -> Outcome {
    let xor_x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
    let xor_y = [0u8, 1, 1, 0];
    let tree = fit(
        &xor_x,
        &xor_y,
        &ModelSpec::DecisionTree { max_depth: Some(2), min_samples_leaf: 1, prune: false },
        0,
    )
    .unwrap();
    let xor_acc = (0..4)
        .filter(|&i| u8::from(tree.predict_proba(xor_x.row(i)) >= 0.5) == xor_y[i])
        .count() as f64
        / 4.0;

    let mut loss_ok = true;
    for seed in 0..5 {
        let d = synth_generate(&SynthConfig { n: 600, clinical_columns: false, noise_features: 5, ..SynthConfig::default() }, seed).unwrap();
        let cols: Vec<Vec<f64>> = (0..d.n_features()).map(|j| d.column(j).to_vec()).collect();
        let x = Matrix::from_columns(&cols, d.n_rows());
        let m = fit(&x, d.target(Target::Early), &ModelSpec::GradientBoosting { n_rounds: 60, learning_rate: 0.3, max_depth: 3 }, seed).unwrap();
        loss_ok &= m.training_loss.len() == 61 && m.training_loss.windows(2).all(|w| w[1] <= w[0]);
    }

    let mut rng = stream(404, 0);
    let mut never_grows = true;
    let mut to_root = 0;
    let noise_runs: usize = 10;
    for run in 0..noise_runs as u64 {
        let (x, y) = noise_data(&mut rng, 300);
        let (hx, hy) = noise_data(&mut rng, 2000);
        let full = fit(&x, &y, &ModelSpec::DecisionTree { max_depth: None, min_samples_leaf: 1, prune: false }, run).unwrap();
        let t = &full.trees[0];
        let pruned = prune(t, &hx, &hy, &ccp_alphas(t));
        never_grows &= pruned.tree.n_nodes() <= t.n_nodes();
        to_root += usize::from(pruned.tree.n_nodes() == 1);
    }
    // pruning with signal present must also never add nodes
    for run in 0..10 {
        let d = synth_generate(&SynthConfig { n: 400, clinical_columns: false, noise_features: 3, ..SynthConfig::default() }, 100 + run).unwrap();
        let cols: Vec<Vec<f64>> = (0..d.n_features()).map(|j| d.column(j).to_vec()).collect();
        let x = Matrix::from_columns(&cols, d.n_rows());
        let y = d.target(Target::Early);
        let (tr, ho): (Vec<usize>, Vec<usize>) = (0..d.n_rows()).partition(|i| i % 4 != 0);
        let full = fit(&x.select_rows(&tr), &tr.iter().map(|&i| y[i]).collect::<Vec<_>>(), &ModelSpec::DecisionTree { max_depth: None, min_samples_leaf: 1, prune: false }, run).unwrap();
        let t = &full.trees[0];
        let pruned = prune(t, &x.select_rows(&ho), &ho.iter().map(|&i| y[i]).collect::<Vec<_>>(), &ccp_alphas(t));
        never_grows &= pruned.tree.n_nodes() <= t.n_nodes();
    }
    outcome(
        xor_acc == 1.0 && loss_ok && never_grows && to_root == noise_runs,
        format!(
            "XOR depth-2 training accuracy {xor_acc}; boosted loss non-increasing: {loss_ok}; pruning never grows: {never_grows}; noise trees pruned to root {to_root}/{noise_runs}"
        ),
    )
}

/// Labels independent of the inputs.
fn noise_data(rng: &mut impl Rng, n: usize) -> (Matrix, Vec<u8>) {
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
    let y = (0..n).map(|_| u8::from(rng.random_bool(0.2))).collect();
    (Matrix::from_rows(&x), y)
}

// ----------------------------------------------------------------- end to end

const E2E_CONFIG: &str = r#"
[synthetic]
n = 1000
prevalence = 0.35
delayed_prevalence = 0.35
noise_features = 10
clinical_columns = true

[[synthetic.informative]]
name = "SIGNAL_1"
mean = 0.0
sd = 1.0
coefficient = 3.0

[[synthetic.informative]]
name = "SIGNAL_2"
mean = 50.0
sd = 10.0
coefficient = 3.0

[[synthetic.informative]]
name = "SIGNAL_3"
mean = 0.0
sd = 1.0
coefficient = -3.0

[[synthetic.informative]]
name = "SIGNAL_4"
mean = 5.0
sd = 2.0
coefficient = 3.0

[[synthetic.informative]]
name = "SIGNAL_5"
mean = 0.0
sd = 1.0
coefficient = 3.0

[run]
task = "early"
k = 5
seed = 11

[splitter.bee_colony]
max_iterations = 200

[search.evolution]
population = 8
generations = 4
inner_k = 3

[search.grammar]
imputers = ["median"]
scalers = ["none", "standardize"]
selectors = ["none", "top:5", "top:10"]

[search.grammar.decision_tree]
max_depth = [4, 8]
min_samples_leaf = [5]
prune = [true]

[search.grammar.random_forest]
n_trees = [50]
max_depth = [8]
min_samples_leaf = [2]

[search.grammar.gradient_boosting]
n_rounds = [100, 200]
learning_rate = [0.1]
max_depth = [2, 3]

[thresholds]
score = "fit"
probability = 0.5

[explain]
ablation = false
shap = true
background = 50
records = 200
"#;

fn end_to_end() -> Outcome {
    let run = |dir: &std::path::Path| -> Vec<u8> {
        let config = RunConfig::from_toml_str(E2E_CONFIG).unwrap();
        let ctx = Context::new(LoadedConfig { config, base_dir: PathBuf::new() }, dir.to_path_buf()).unwrap();
        stages::report(&ctx).unwrap();
        fs::read(dir.join("report_early.json")).unwrap()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let bytes_a = run(a.path());
    let identical = bytes_a == run(b.path());
    let metrics_file = a.path().join("metrics_early.csv").exists() && a.path().join("summary.json").exists();
    let report: serde_json::Value = serde_json::from_slice(&bytes_a).unwrap();
    let tools = report["report"]["tools"].as_array().unwrap();
    let accuracy = |t: &serde_json::Value| t["mean"]["accuracy"].as_f64().unwrap();
    let acc = tools.iter().find(|t| t["tool"] == "pipeline").map(accuracy).unwrap();
    let baselines: Vec<(String, f64)> = tools
        .iter()
        .filter(|t| t["tool"] != "pipeline")
        .map(|t| (t["tool"].as_str().unwrap().to_string(), accuracy(t)))
        .collect();
    let beats = baselines.len() == 3 && baselines.iter().all(|b| acc > b.1);
    let base_txt: Vec<String> = baselines.iter().map(|(n, a)| format!("{n} {a:.4}")).collect();
    outcome(
        acc >= E2E_MIN_ACCURACY && beats && identical && metrics_file,
        format!(
            "pipeline accuracy {acc:.4} (min {E2E_MIN_ACCURACY}); baselines {}; reports byte-identical: {identical}",
            base_txt.join(", ")
        ),
    )
}

/// Name, wall-clock limit, check.
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    // cargo passes harness flags (e.g. --list when discovering tests)
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 7] = [
        ("metric oracle suite", Some(Duration::from_secs(5)), metric_oracle),
        ("splitter", Some(Duration::from_secs(60)), splitter),
        ("SHAP correctness", Some(Duration::from_secs(120)), shap),
        ("ablation importance", None, ablation),
        ("ANOVA", None, anova),
        ("model sanity", None, model_sanity),
        ("end-to-end pipeline", Some(Duration::from_secs(600)), end_to_end),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let (o, took) = timed(limit, f);
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    }
    println!("SKIP public-dataset directional check: dataset not available in this environment");
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
