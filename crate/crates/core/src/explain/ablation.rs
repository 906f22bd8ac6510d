use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::automl::PipelineFactory;
use crate::dataset::{Dataset, FeatureSpec, Target};
use crate::splitter::Partition;
use crate::{Error, Result};

/// Name of the standard-normal column appended for the noise reference.
pub const NOISE_FEATURE: &str = "ABLATION_NOISE";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceVector {
    pub features: Vec<String>,
    /// Non-negative, summing to one unless `all_zeroed`.
    pub importance: Vec<f64>,
    /// Full-model accuracy minus accuracy without the feature.
    pub raw_delta: Vec<f64>,
    /// Accuracy with the noise column minus full-model accuracy.
    pub noise_delta: f64,
    pub zeroed: Vec<String>,
    pub baseline_accuracy: f64,
    /// No feature cleared the noise floor; `importance` is uniform.
    pub all_zeroed: bool,
}

/// Mean held-out accuracy (cut-off 0.5) over the cohorts of `p`, skipping
/// folds whose training rows hold one class.
pub fn cv_accuracy(factory: &dyn PipelineFactory, d: &Dataset, p: &Partition, target: Target, seed: u64) -> Result<f64> {
    if p.n_records() != d.n_rows() {
        return Err(Error::contract("partition does not cover the dataset"));
    }
    let cohorts = p.cohorts();
    let mut accs = Vec::with_capacity(p.k());
    for (fold, test_rows) in cohorts.iter().enumerate() {
        let train = d.subset(&p.complement(fold));
        let y = train.target(target);
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        let test = d.subset(test_rows);
        let model = factory.fit(&train, target, crate::rng::derive_seed(seed, fold as u64))?;
        let probs = model.predict_proba(&test)?;
        let truth = test.target(target);
        let hits = probs.iter().zip(truth).filter(|(q, &t)| u8::from(**q >= 0.5) == t).count();
        accs.push(hits as f64 / truth.len() as f64);
    }
    if accs.is_empty() {
        return Err(Error::contract("every fold has single-class training rows"));
    }
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}

/// Retrain-without-feature importance with a noise floor: a feature whose
/// |delta| does not exceed that of an appended N(0, 1) column is zeroed and
/// the rest are L1-normalised. Every retraining reuses `seed`.
pub fn ablation_importance(
    factory: &dyn PipelineFactory,
    d: &Dataset,
    p: &Partition,
    target: Target,
    seed: u64,
) -> Result<ImportanceVector> {
    let names: Vec<String> = d.feature_names().iter().map(|s| s.to_string()).collect();
    if names.is_empty() {
        return Err(Error::contract("no features to rank"));
    }
    let baseline = cv_accuracy(factory, d, p, target, seed)?;

    let mut rng = crate::rng::stream(seed, 0xAB1A);
    let normal: Normal<f64> = Normal::new(0.0, 1.0).expect("valid normal");
    let noise: Vec<f64> = (0..d.n_rows()).map(|_| normal.sample(&mut rng).clamp(-50.0, 50.0)).collect();
    let with_noise = d.with_feature(FeatureSpec::continuous(NOISE_FEATURE, -50.0, 50.0), noise)?;

    let mut jobs: Vec<Option<&str>> = names.iter().map(|n| Some(n.as_str())).collect();
    jobs.push(None);
    let accs: Vec<f64> = jobs
        .par_iter()
        .map(|job| match job {
            Some(name) => cv_accuracy(factory, &d.without_feature(name)?, p, target, seed),
            None => cv_accuracy(factory, &with_noise, p, target, seed),
        })
        .collect::<Result<_>>()?;
    let noise_delta = accs[names.len()] - baseline;
    let raw_delta: Vec<f64> = accs[..names.len()].iter().map(|a| baseline - a).collect();

    let mut importance: Vec<f64> = raw_delta
        .iter()
        .map(|dlt| if dlt.abs() <= noise_delta.abs() { 0.0 } else { dlt.abs() })
        .collect();
    let zeroed = names
        .iter()
        .zip(&importance)
        .filter(|(_, &v)| v == 0.0)
        .map(|(n, _)| n.clone())
        .collect();
    let total: f64 = importance.iter().sum();
    let all_zeroed = total == 0.0;
    if all_zeroed {
        log::warn!("no feature cleared the noise floor; importance is uniform");
        let u = 1.0 / names.len() as f64;
        importance.iter_mut().for_each(|v| *v = u);
    } else {
        importance.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ImportanceVector {
        features: names,
        importance,
        raw_delta,
        noise_delta,
        zeroed,
        baseline_accuracy: baseline,
        all_zeroed,
    })
}
