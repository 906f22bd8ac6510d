use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::schema::{FeatureSchema, FeatureSpec, DELAYED_TARGET, EARLY_TARGET};
use super::Dataset;
use crate::{Error, Result};

/// A continuous feature that drives the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformativeFeature {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// Log-odds change per standard deviation.
    pub coefficient: f64,
}

/// Settings for [`synth_generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    /// Target positive rate of the early outcome.
    pub prevalence: f64,
    /// Target positive rate of the delayed outcome.
    pub delayed_prevalence: f64,
    pub informative: Vec<InformativeFeature>,
    /// Number of standard-normal columns unrelated to either outcome.
    pub noise_features: usize,
    /// Adds AGE, GENDER and the clinical-score factor columns, all drawn
    /// independently of the outcomes.
    pub clinical_columns: bool,
    /// Probability that an informative or noise cell is blanked.
    pub missing_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 2000,
            prevalence: 0.3,
            delayed_prevalence: 0.3,
            informative: (1..=5)
                .map(|i| InformativeFeature {
                    name: format!("SIGNAL_{i}"),
                    mean: 0.0,
                    sd: 1.0,
                    coefficient: 2.0,
                })
                .collect(),
            noise_features: 20,
            clinical_columns: true,
            missing_rate: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("prevalence", self.prevalence),
            ("delayed_prevalence", self.delayed_prevalence),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config("missing_rate must lie in [0, 1)".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        for f in &self.informative {
            if !(f.sd > 0.0 && f.sd.is_finite() && f.mean.is_finite() && f.coefficient.is_finite()) {
                return Err(Error::Config(format!("{}: invalid mean/sd/coefficient", f.name)));
            }
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intercept `b` such that the sample mean of sigmoid(b + eta) equals `target`.
fn calibrate_intercept(eta: &[f64], target: f64) -> f64 {
    let mean_p = |b: f64| eta.iter().map(|e| sigmoid(b + e)).sum::<f64>() / eta.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Draws a reproducible dataset whose outcomes follow a logistic model of the
/// informative features.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let n = config.n;
    let mut rng = crate::rng::stream(seed, 0x5EED);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut specs = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();

    if config.clinical_columns {
        let mut bern = |name: &str, p: f64, rng: &mut rand_chacha::ChaCha8Rng| {
            specs.push(FeatureSpec::binary(name));
            columns.push((0..n).map(|_| f64::from(u8::from(rng.random_bool(p)))).collect());
        };
        bern("HX_PONV", 0.0201, &mut rng);
        bern("MIGRAINE", 0.0104, &mut rng);
        bern("POSTOPI_PACU", 0.193, &mut rng);
        bern("INHALE_ANES", 0.7689, &mut rng);
        bern("NITROUS", 0.0138, &mut rng);

        specs.push(FeatureSpec::continuous("AGE", 18.0, 120.0).with_unit("years"));
        let age: Normal<f64> = Normal::new(47.81, 19.16).expect("valid normal");
        columns.push((0..n).map(|_| age.sample(&mut rng).clamp(18.0, 100.0)).collect());

        specs.push(FeatureSpec::categorical("GENDER", &["female", "male"]));
        columns.push((0..n).map(|_| if rng.random_bool(0.573) { 0.0 } else { 1.0 }).collect());

        specs.push(FeatureSpec::categorical("SMOKE_STAT", &["non smoker", "smoker"]));
        columns.push((0..n).map(|_| if rng.random_bool(0.2139) { 1.0 } else { 0.0 }).collect());

        // lognormal matched to mean 110, sd 96 min
        let (m, s) = (110.12f64, 96.24f64);
        let sigma2 = (1.0 + (s * s) / (m * m)).ln();
        let dur = LogNormal::new(m.ln() - 0.5 * sigma2, sigma2.sqrt()).expect("valid lognormal");
        specs.push(FeatureSpec::continuous("ANES_DUR", 0.0, 1440.0).with_unit("min"));
        columns.push((0..n).map(|_| dur.sample(&mut rng).clamp(5.0, 975.0)).collect());
    }

    let mut eta = vec![0.0; n];
    let mut planted = Vec::new();
    for f in &config.informative {
        let z: Vec<f64> = (0..n).map(|_| std_normal.sample(&mut rng)).collect();
        for (e, zi) in eta.iter_mut().zip(&z) {
            *e += f.coefficient * zi;
        }
        specs.push(FeatureSpec::continuous(
            &f.name,
            f.mean - 12.0 * f.sd,
            f.mean + 12.0 * f.sd,
        ));
        planted.push(columns.len());
        columns.push(z.iter().map(|zi| (f.mean + f.sd * zi).clamp(f.mean - 12.0 * f.sd, f.mean + 12.0 * f.sd)).collect());
    }
    for i in 0..config.noise_features {
        specs.push(FeatureSpec::continuous(&format!("NOISE_{:02}", i + 1), -12.0, 12.0));
        planted.push(columns.len());
        columns.push((0..n).map(|_| std_normal.sample(&mut rng).clamp(-12.0, 12.0)).collect());
    }

    let mut targets = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for (k, prevalence) in [config.prevalence, config.delayed_prevalence].into_iter().enumerate() {
        let b = calibrate_intercept(&eta, prevalence);
        targets[k] = eta
            .iter()
            .map(|e| u8::from(rng.random::<f64>() < sigmoid(b + e)))
            .collect();
    }

    if config.missing_rate > 0.0 {
        for &j in &planted {
            for v in columns[j].iter_mut() {
                if rng.random::<f64>() < config.missing_rate {
                    *v = f64::NAN;
                }
            }
        }
    }

    specs.push(FeatureSpec::target(EARLY_TARGET));
    specs.push(FeatureSpec::target(DELAYED_TARGET));
    Dataset::new(FeatureSchema::new(specs)?, columns, targets)
}
