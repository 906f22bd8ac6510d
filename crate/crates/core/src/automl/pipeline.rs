use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;

use super::genome::{Imputer, PipelineGenome, Scaler, Selector};
use crate::dataset::{Dataset, FeatureKind, Target, ORDERED_CATEGORICALS};
use crate::model::{self, information_gain, Matrix, TreeEnsemble};
use crate::{Error, Result};

/// A fitted model that scores every row of a dataset.
pub trait Classifier: Send + Sync {
    /// Positive-class probability per row.
    fn predict_proba(&self, data: &Dataset) -> Result<Vec<f64>>;
    fn describe(&self) -> String;
}

/// Builds a fresh classifier from training rows only.
pub trait PipelineFactory: Sync {
    fn fit(&self, train: &Dataset, target: Target, seed: u64) -> Result<Box<dyn Classifier>>;
    fn describe(&self) -> String;
}

/// How one schema feature maps onto encoded columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
enum ColumnSource {
    /// Numeric value (continuous, binary, ordinal code).
    Value(usize),
    /// Indicator of category `code` of an unordered categorical.
    OneHot { feature: usize, code: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Encoder {
    sources: Vec<ColumnSource>,
    names: Vec<String>,
    /// Feature index -> codes observed in training (unordered categoricals).
    seen: Vec<Option<Vec<bool>>>,
}

impl Encoder {
    fn fit(d: &Dataset) -> Encoder {
        let mut sources = Vec::new();
        let mut names = Vec::new();
        let mut seen = Vec::new();
        for (j, spec) in d.schema().features().iter().enumerate() {
            match &spec.kind {
                FeatureKind::Categorical { categories }
                    if !ORDERED_CATEGORICALS.contains(&spec.name.as_str()) && categories.len() > 2 =>
                {
                    let mut s = vec![false; categories.len()];
                    for &v in d.column(j) {
                        if !v.is_nan() {
                            s[v as usize] = true;
                        }
                    }
                    for (code, label) in categories.iter().enumerate() {
                        sources.push(ColumnSource::OneHot { feature: j, code });
                        names.push(format!("{}={label}", spec.name));
                    }
                    seen.push(Some(s));
                }
                _ => {
                    sources.push(ColumnSource::Value(j));
                    names.push(spec.name.clone());
                    seen.push(None);
                }
            }
        }
        Encoder { sources, names, seen }
    }

    /// Column-major encoding; unseen categories become missing in every
    /// indicator column of their feature and are tallied in `unknown`.
    fn transform(&self, d: &Dataset, unknown: &AtomicUsize) -> Vec<Vec<f64>> {
        let n = d.n_rows();
        let mut tally = 0;
        for (j, seen) in self.seen.iter().enumerate() {
            if let Some(seen) = seen {
                tally += d.column(j).iter().filter(|v| !v.is_nan() && !seen[**v as usize]).count();
            }
        }
        unknown.fetch_add(tally, Ordering::Relaxed);
        self.sources
            .iter()
            .map(|src| match *src {
                ColumnSource::Value(j) => d.column(j).to_vec(),
                ColumnSource::OneHot { feature, code } => {
                    let seen = self.seen[feature].as_ref().expect("categorical");
                    (0..n)
                        .map(|i| {
                            let v = d.column(feature)[i];
                            if v.is_nan() || !seen[v as usize] {
                                f64::NAN
                            } else {
                                f64::from(u8::from(v as usize == code))
                            }
                        })
                        .collect()
                }
            })
            .collect()
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mode(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if j > best_n {
            best = sorted[i];
            best_n = j;
        }
        i += j;
    }
    best
}

/// Best single-threshold information gain of column `col` for labels `y`.
pub(crate) fn best_split_gain(col: &[f64], y: &[u8]) -> f64 {
    let mut pairs: Vec<(f64, u8)> = col.iter().copied().zip(y.iter().copied()).filter(|p| !p.0.is_nan()).collect();
    if pairs.len() < 2 {
        return 0.0;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = [pairs.len() as f64, pairs.iter().map(|p| f64::from(p.1)).sum()];
    let mut left = [0.0, 0.0];
    let mut best = 0.0f64;
    for w in pairs.windows(2) {
        left[0] += 1.0;
        left[1] += f64::from(w[0].1);
        if w[1].0 > w[0].0 {
            let right = [total[0] - left[0], total[1] - left[1]];
            best = best.max(information_gain(total, left, right));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Preprocessor {
    fill: Vec<f64>,
    /// Encoded columns that get a missingness indicator.
    indicators: Vec<usize>,
    shift: Vec<f64>,
    scale: Vec<f64>,
    selected: Vec<usize>,
}

/// A genome fitted on training rows: encoder, imputer, scaler, selector and
/// tree model.
#[derive(Debug, Serialize)]
pub struct FittedPipeline {
    pub genome: PipelineGenome,
    pub target: Target,
    encoder: Encoder,
    pre: Preprocessor,
    pub model: TreeEnsemble,
    /// Names of the columns the model sees.
    pub feature_names: Vec<String>,
    #[serde(skip)]
    unknown_categories: AtomicUsize,
}

impl FittedPipeline {
    pub fn fit(genome: &PipelineGenome, train: &Dataset, target: Target, seed: u64) -> Result<FittedPipeline> {
        if train.n_rows() == 0 {
            return Err(Error::contract("cannot fit a pipeline on zero rows"));
        }
        let y = train.target(target);
        let encoder = Encoder::fit(train);
        let scratch = AtomicUsize::new(0);
        let raw = encoder.transform(train, &scratch);

        let mut fill = Vec::with_capacity(raw.len());
        let mut indicators = Vec::new();
        for (c, col) in raw.iter().enumerate() {
            let mut known: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            let value = if known.is_empty() {
                0.0
            } else {
                match (genome.imputer, &encoder.sources[c]) {
                    (Imputer::Zero, _) => 0.0,
                    (_, ColumnSource::Value(j))
                        if matches!(train.schema().features()[*j].kind, FeatureKind::Continuous { .. }) =>
                    {
                        median(&mut known)
                    }
                    _ => mode(&known),
                }
            };
            fill.push(value);
            if genome.imputer == Imputer::Indicator && known.len() < col.len() {
                indicators.push(c);
            }
        }
        let mut pre = Preprocessor {
            fill,
            indicators,
            shift: Vec::new(),
            scale: Vec::new(),
            selected: Vec::new(),
        };
        let names = pre_names(&encoder.names, &pre.indicators);
        let cols = pre.impute(raw);

        for col in &cols {
            let (shift, scale) = match genome.scaler {
                Scaler::None => (0.0, 1.0),
                Scaler::Standardize => {
                    let n = col.len() as f64;
                    let mean = col.iter().sum::<f64>() / n;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                    (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
                }
                Scaler::MinMax => {
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, if hi > lo { hi - lo } else { 1.0 })
                }
            };
            pre.shift.push(shift);
            pre.scale.push(scale);
        }
        let cols = pre.scale_columns(cols);

        pre.selected = match genome.selector {
            Selector::Top(m) if m < cols.len() => {
                let gains: Vec<f64> = cols.iter().map(|c| best_split_gain(c, y)).collect();
                let mut order: Vec<usize> = (0..cols.len()).collect();
                order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
                let mut keep = order[..m].to_vec();
                keep.sort_unstable();
                keep
            }
            _ => (0..cols.len()).collect(),
        };
        let feature_names = pre.selected.iter().map(|&c| names[c].clone()).collect();
        let x = pre.select(&cols, train.n_rows());
        let model = model::fit(&x, y, &genome.model, seed)?;
        Ok(FittedPipeline {
            genome: genome.clone(),
            target,
            encoder,
            pre,
            model,
            feature_names,
            unknown_categories: AtomicUsize::new(0),
        })
    }

    /// Design matrix the model sees for `d`.
    pub fn transform(&self, d: &Dataset) -> Result<Matrix> {
        if d.feature_names() != self.training_features() {
            return Err(Error::contract("dataset columns differ from the training schema"));
        }
        let raw = self.encoder.transform(d, &self.unknown_categories);
        let cols = self.pre.scale_columns(self.pre.impute(raw));
        Ok(self.pre.select(&cols, d.n_rows()))
    }

    fn training_features(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (src, name) in self.encoder.sources.iter().zip(&self.encoder.names) {
            match src {
                ColumnSource::Value(_) => out.push(name),
                ColumnSource::OneHot { code: 0, .. } => out.push(name.split_once('=').map_or(name, |p| p.0)),
                ColumnSource::OneHot { .. } => {}
            }
        }
        out
    }

    /// Categorical values not seen during fitting, summed over every
    /// `transform` call so far.
    pub fn unknown_category_count(&self) -> usize {
        self.unknown_categories.load(Ordering::Relaxed)
    }
}

fn pre_names(names: &[String], indicators: &[usize]) -> Vec<String> {
    let mut out = names.to_vec();
    out.extend(indicators.iter().map(|&c| format!("{}_MISSING", names[c])));
    out
}

impl Preprocessor {
    fn impute(&self, raw: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let mut extra: Vec<Vec<f64>> = self
            .indicators
            .iter()
            .map(|&c| raw[c].iter().map(|v| f64::from(u8::from(v.is_nan()))).collect())
            .collect();
        let mut cols: Vec<Vec<f64>> = raw
            .into_iter()
            .zip(&self.fill)
            .map(|(col, &f)| col.into_iter().map(|v| if v.is_nan() { f } else { v }).collect())
            .collect();
        cols.append(&mut extra);
        cols
    }

    fn scale_columns(&self, cols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        cols.into_iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(col, (&s, &k))| col.into_iter().map(|v| (v - s) / k).collect())
            .collect()
    }

    fn select(&self, cols: &[Vec<f64>], n: usize) -> Matrix {
        let picked: Vec<Vec<f64>> = self.selected.iter().map(|&c| cols[c].clone()).collect();
        Matrix::from_columns(&picked, n)
    }
}

impl Classifier for FittedPipeline {
    fn predict_proba(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(self.model.predict_matrix(&self.transform(data)?))
    }

    fn describe(&self) -> String {
        self.genome.to_string()
    }
}

/// Factory that always fits the same genome.
#[derive(Debug, Clone)]
pub struct FixedPipeline(pub PipelineGenome);

impl PipelineFactory for FixedPipeline {
    fn fit(&self, train: &Dataset, target: Target, seed: u64) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(FittedPipeline::fit(&self.0, train, target, seed)?))
    }

    fn describe(&self) -> String {
        format!("fixed {}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, FeatureSchema, FeatureSpec, SynthConfig, DELAYED_TARGET, EARLY_TARGET};
    use crate::model::ModelSpec;

    fn genome(text: &str) -> PipelineGenome {
        text.parse().unwrap()
    }

    fn small() -> Dataset {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("X", -10.0, 10.0),
            FeatureSpec::categorical("PROC", &["a", "b", "c"]),
            FeatureSpec::target(EARLY_TARGET),
            FeatureSpec::target(DELAYED_TARGET),
        ])
        .unwrap();
        Dataset::new(
            schema,
            vec![
                vec![1.0, 2.0, f64::NAN, 4.0, 5.0, 6.0],
                vec![0.0, 1.0, 0.0, 1.0, f64::NAN, 0.0],
            ],
            [vec![0, 0, 0, 1, 1, 1], vec![0; 6]],
        )
        .unwrap()
    }

    #[test]
    fn encoding_imputation_and_indicators() {
        let d = small();
        let p = FittedPipeline::fit(
            &genome("imputer=indicator;scaler=none;selector=none;model=dt(depth=2,leaf=1,prune=off)"),
            &d,
            Target::Early,
            0,
        )
        .unwrap();
        assert_eq!(
            p.feature_names,
            vec!["X", "PROC=a", "PROC=b", "PROC=c", "X_MISSING", "PROC=a_MISSING", "PROC=b_MISSING", "PROC=c_MISSING"]
        );
        let x = p.transform(&d).unwrap();
        assert_eq!(x.get(2, 0), 4.0); // median of 1,2,4,5,6
        assert_eq!(x.get(2, 4), 1.0);
        assert_eq!(x.get(4, 1), 1.0); // mode of PROC=a indicator
        assert_eq!(p.unknown_category_count(), 0);
    }

    #[test]
    fn unseen_category_is_counted_and_missing() {
        let d = small();
        // category "c" never appears in training
        let p = FittedPipeline::fit(
            &genome("imputer=zero;scaler=none;selector=none;model=dt(depth=2,leaf=1,prune=off)"),
            &d,
            Target::Early,
            0,
        )
        .unwrap();
        let test = Dataset::new(
            d.schema().clone(),
            vec![vec![3.0], vec![2.0]],
            [vec![0], vec![0]],
        )
        .unwrap();
        let probs = p.predict_proba(&test).unwrap();
        assert!((0.0..=1.0).contains(&probs[0]));
        assert_eq!(p.unknown_category_count(), 1);
        let x = p.transform(&test).unwrap();
        assert_eq!(x.get(0, 1), 0.0); // imputed with zero
    }

    #[test]
    fn scalers_and_selector() {
        let d = small();
        let p = FittedPipeline::fit(
            &genome("imputer=median;scaler=minmax;selector=top:1;model=dt(depth=2,leaf=1,prune=off)"),
            &d,
            Target::Early,
            0,
        )
        .unwrap();
        assert_eq!(p.feature_names, vec!["X"]);
        let x = p.transform(&d).unwrap();
        assert_eq!(x.get(0, 0), 0.0);
        assert_eq!(x.get(5, 0), 1.0);
        let s = FittedPipeline::fit(
            &genome("imputer=median;scaler=standardize;selector=none;model=dt(depth=2,leaf=1,prune=off)"),
            &d,
            Target::Early,
            0,
        )
        .unwrap();
        let xs = s.transform(&d).unwrap();
        let mean: f64 = (0..6).map(|i| xs.get(i, 0)).sum::<f64>() / 6.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn planted_signal_is_learned() {
        let cfg = SynthConfig { n: 600, clinical_columns: false, noise_features: 5, ..SynthConfig::default() };
        let d = synth_generate(&cfg, 1).unwrap();
        let train = d.subset(&(0..400).collect::<Vec<_>>());
        let test = d.subset(&(400..600).collect::<Vec<_>>());
        let g = PipelineGenome {
            imputer: Imputer::Median,
            scaler: Scaler::None,
            selector: Selector::None,
            model: ModelSpec::default_boosting(),
        };
        let p = FixedPipeline(g).fit(&train, Target::Early, 3).unwrap();
        let probs = p.predict_proba(&test).unwrap();
        let y = test.target(Target::Early);
        let acc = probs.iter().zip(y).filter(|(p, &t)| u8::from(**p >= 0.5) == t).count() as f64 / 200.0;
        assert!(acc > 0.75, "{acc}");
    }

    #[test]
    fn gain_ranking_oracle() {
        // perfectly separating column beats a constant one
        assert!((best_split_gain(&[0.0, 0.0, 1.0, 1.0], &[0, 0, 1, 1]) - 1.0).abs() < 1e-12);
        assert_eq!(best_split_gain(&[3.0; 4], &[0, 1, 0, 1]), 0.0);
    }
}
