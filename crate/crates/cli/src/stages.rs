//! The workflow stages. Each stage reads what it needs from earlier stages'
//! artifacts when they were produced under the same configuration, and
//! recomputes them otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use ponv_core::automl::{
    search_pipeline, EvolutionOutcome, EvolvedPipeline, FittedPipeline, FixedPipeline, PipelineFactory,
    PipelineGenome,
};
use ponv_core::dataset::{
    correlation, descriptive_stats, load_csv, load_csv_filtered, synth_generate, CorrelationMatrix,
    CorrelationMethod, Dataset, FeatureSchema, Target,
};
use ponv_core::evaluation::{kfold_evaluate, EvaluationReport, KFoldConfig, Tool};
use ponv_core::explain::{ablation_importance, shap_summary, ImportanceVector, NOISE_FEATURE};
use ponv_core::model::Matrix;
use ponv_core::scores::ScoreSet;
use ponv_core::splitter::{dbc_optimize, random_partition, BeeColonyParams, CellIndex, Partition};
use ponv_core::ARTIFACT_VERSION;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{LoadedConfig, RunConfig, SearchMode, SplitMethod};
use crate::error::CliError;
use crate::output::{json_bytes, num, read_meta, write_atomic, write_json, write_svg, CsvOut, Meta, SeedSet};
use crate::svg;

/// Everything a stage needs: the validated config, the loaded data and the
/// provenance block stamped on every artifact.
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub meta: Meta,
    pub data: Dataset,
    pub scores: ScoreSet,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() || base.as_os_str().is_empty() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Context {
    /// `out_dir` has already been chosen by the caller (flag, environment or
    /// config, in that order).
    pub fn new(loaded: LoadedConfig, out_dir: PathBuf) -> Result<Context, CliError> {
        let LoadedConfig { config, base_dir } = loaded;
        let seeds = SeedSet::from_run_seed(config.run.seed);
        let (data, scores, data_hash) = if let Some(ds) = &config.data {
            let schema = match &ds.schema {
                Some(p) => FeatureSchema::load(resolve(&base_dir, p)).map_err(|e| CliError::config("data.schema", e.to_string()))?,
                None => FeatureSchema::ponv_default(),
            };
            let scores = match &ds.scores {
                Some(p) => ScoreSet::load(resolve(&base_dir, p)).map_err(|e| CliError::config("data.scores", e.to_string()))?,
                None => ScoreSet::default(),
            };
            let path = resolve(&base_dir, &ds.path);
            let bytes = fs::read(&path).map_err(|e| CliError::Data(ponv_core::Error::Io { path: path.clone(), source: e }))?;
            let data = if ds.drop_invalid_rows {
                let (d, rejected) = load_csv_filtered(&path, &schema).map_err(CliError::Data)?;
                for r in &rejected {
                    log::warn!("dropped row {}: {}", r.row, r.reason);
                }
                d
            } else {
                load_csv(&path, &schema).map_err(CliError::Data)?
            };
            (data, scores, sha256_hex(&bytes))
        } else {
            let synth = config.synthetic.as_ref().expect("validated: data or synthetic");
            let data = synth_generate(synth, seeds.data).map_err(CliError::Data)?;
            let desc = format!("{}|{}", serde_json::to_string(synth).expect("serializes"), seeds.data);
            (data, ScoreSet::default(), sha256_hex(desc.as_bytes()))
        };
        if data.n_rows() < config.run.k {
            return Err(CliError::config(
                "run.k",
                format!("k = {} exceeds the {} available records", config.run.k, data.n_rows()),
            ));
        }
        fs::create_dir_all(&out_dir).map_err(|e| CliError::output(&out_dir, e))?;
        let meta = Meta {
            artifact_version: ARTIFACT_VERSION.to_string(),
            config_hash: config.hash(),
            seeds,
            data_hash,
        };
        Ok(Context {
            config,
            out_dir,
            meta,
            data,
            scores,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn fresh(&self, name: &str) -> bool {
        read_meta(&self.path(name)).as_ref() == Some(&self.meta)
    }

    fn factory(&self) -> Result<Box<dyn PipelineFactory>, CliError> {
        Ok(match self.config.search.mode {
            SearchMode::Evolve => Box::new(EvolvedPipeline {
                grammar: self.config.search.grammar.clone(),
                params: self.config.search.evolution.clone(),
            }),
            SearchMode::Fixed => Box::new(FixedPipeline(self.config.search.fixed_genome()?)),
        })
    }
}

// ---------------------------------------------------------------- stats

fn write_correlation(ctx: &Context, m: &CorrelationMatrix, stem: &str) -> Result<(), CliError> {
    let mut header = vec!["feature"];
    header.extend(m.names.iter().map(String::as_str));
    let mut out = CsvOut::new(ctx.path(&format!("{stem}.csv")), &header);
    for (i, name) in m.names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend((0..m.dim()).map(|j| num(m.get(i, j))));
        out.row(row);
    }
    out.finish(&ctx.meta)?;
    let title = format!("{stem} ({})", &ctx.meta.config_hash[..12]);
    let chart = svg::heatmap(&title, &m.names, |i, j| m.get(i, j));
    write_svg(&ctx.path(&format!("{stem}.svg")), &ctx.meta, &chart)
}

pub fn stats(ctx: &Context) -> Result<(), CliError> {
    let table = descriptive_stats(&ctx.data).map_err(|e| CliError::stage("stats", e))?;
    let mut body = Vec::new();
    table.write_csv(&mut body).map_err(|e| CliError::stage("stats", e))?;
    crate::output::write_csv_bytes(&ctx.path("stats.csv"), &ctx.meta, &body)?;
    for (method, stem) in [
        (CorrelationMethod::Pearson, "correlation_pearson"),
        (CorrelationMethod::Spearman, "correlation_spearman"),
    ] {
        let m = correlation(&ctx.data, method).map_err(|e| CliError::stage("stats", e))?;
        write_correlation(ctx, &m, stem)?;
    }
    log::info!("stats: {} rows, {} features", ctx.data.n_rows(), ctx.data.n_features());
    Ok(())
}

// ---------------------------------------------------------------- split

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSummary {
    pub method: String,
    pub k: usize,
    pub sizes: Vec<usize>,
    pub objective: f64,
    /// Objective of a seeded random balanced partition, for reference.
    pub random_objective: f64,
    pub iterations: usize,
    pub timed_out: bool,
    pub history: Vec<f64>,
}

pub fn split(ctx: &Context) -> Result<Partition, CliError> {
    let st = |e| CliError::stage("split", e);
    let k = ctx.config.run.k;
    let seed = ctx.meta.seeds.split;
    let random = random_partition(&ctx.data, k, seed).map_err(st)?;
    let random_objective = random.objective();
    let (partition, summary) = match ctx.config.splitter.method {
        SplitMethod::Random => {
            let summary = SplitSummary {
                method: "random".into(),
                k,
                sizes: random.sizes().to_vec(),
                objective: random_objective,
                random_objective,
                iterations: 0,
                timed_out: false,
                history: Vec::new(),
            };
            (random, summary)
        }
        SplitMethod::Dbc => {
            let params = BeeColonyParams {
                seed,
                ..ctx.config.splitter.bee_colony.clone()
            };
            let out = dbc_optimize(&ctx.data, k, &params).map_err(st)?;
            let summary = SplitSummary {
                method: "dbc".into(),
                k,
                sizes: out.partition.sizes().to_vec(),
                objective: out.objective,
                random_objective,
                iterations: out.iterations,
                timed_out: out.timed_out,
                history: out.history,
            };
            (out.partition, summary)
        }
    };
    partition.check_invariants().map_err(st)?;

    let mut out = CsvOut::new(ctx.path("split.csv"), &["record", "fold"]);
    for (i, f) in partition.assignment().iter().enumerate() {
        out.row([i.to_string(), f.to_string()]);
    }
    out.finish(&ctx.meta)?;
    write_json(&ctx.path("split.json"), &ctx.meta, &summary)?;
    log::info!(
        "split: {} objective {:.6} (random {:.6})",
        summary.method,
        summary.objective,
        summary.random_objective
    );
    Ok(partition)
}

fn load_split(ctx: &Context) -> Result<Partition, CliError> {
    let st = |e| CliError::stage("split", e);
    let path = ctx.path("split.csv");
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&path)
        .map_err(|e| st(e.into()))?;
    let mut assignment = vec![usize::MAX; ctx.data.n_rows()];
    for rec in r.records() {
        let rec = rec.map_err(|e| st(e.into()))?;
        let parse = |i: usize| -> Result<usize, CliError> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| st(ponv_core::Error::Contract(format!("{}: malformed row", path.display()))))
        };
        let (i, f) = (parse(0)?, parse(1)?);
        if i >= assignment.len() {
            return Err(st(ponv_core::Error::Contract(format!("{}: record {i} out of range", path.display()))));
        }
        assignment[i] = f;
    }
    let index = CellIndex::new(&ctx.data).map_err(st)?;
    Partition::new(&index, ctx.config.run.k, assignment).map_err(st)
}

/// The partition from `split.csv` when it is current, otherwise a fresh one.
pub fn ensure_split(ctx: &Context) -> Result<Partition, CliError> {
    if ctx.fresh("split.json") {
        load_split(ctx)
    } else {
        split(ctx)
    }
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub target: Target,
    pub target_column: String,
    pub mode: String,
    pub genome: String,
    /// Inner cross-validated accuracy of the chosen genome.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolved_genome: Option<String>,
    pub n_train: usize,
    pub model_features: Vec<String>,
    pub model_nodes: usize,
}

#[derive(Serialize)]
struct ModelArtifact<'a> {
    pipeline: &'a FittedPipeline,
}

fn history_csv(ctx: &Context, target: Target, evo: &EvolutionOutcome) -> Result<(), CliError> {
    let mut out = CsvOut::new(ctx.path(&format!("fitness_history_{target}.csv")), &["generation", "best_fitness"]);
    for (g, f) in evo.history.iter().enumerate() {
        out.row([g.to_string(), num(*f)]);
    }
    out.finish(&ctx.meta)
}

pub fn train(ctx: &Context, target: Target) -> Result<PipelineGenome, CliError> {
    let st = |e| CliError::stage("train", e);
    let seed = ctx.meta.seeds.search;
    let (genome, inner, evolved, mode) = match ctx.config.search.mode {
        SearchMode::Fixed => (ctx.config.search.fixed_genome()?, None, None, "fixed"),
        SearchMode::Evolve => {
            let params = ponv_core::automl::EvolutionParams {
                seed,
                ..ctx.config.search.evolution.clone()
            };
            let out = search_pipeline(&ctx.data, target, &ctx.config.search.grammar, &params).map_err(st)?;
            history_csv(ctx, target, &out.evolution)?;
            for f in &out.evolution.failures {
                log::warn!("train {target}: {f}");
            }
            (
                out.tuned.clone(),
                Some(out.tuned_fitness),
                Some(out.evolution.best.to_string()),
                "evolve",
            )
        }
    };
    let fitted = FittedPipeline::fit(&genome, &ctx.data, target, seed).map_err(st)?;
    write_json(
        &ctx.path(&format!("model_{target}.json")),
        &ctx.meta,
        &ModelArtifact { pipeline: &fitted },
    )?;
    let summary = TrainSummary {
        target,
        target_column: target.column().to_string(),
        mode: mode.into(),
        genome: genome.to_string(),
        inner_accuracy: inner,
        evolved_genome: evolved,
        n_train: ctx.data.n_rows(),
        model_features: fitted.feature_names.clone(),
        model_nodes: fitted.model.n_nodes(),
    };
    write_json(&ctx.path(&format!("train_{target}.json")), &ctx.meta, &summary)?;
    log::info!("train {target}: {genome}");
    Ok(genome)
}

pub fn ensure_train(ctx: &Context, target: Target) -> Result<PipelineGenome, CliError> {
    let name = format!("train_{target}.json");
    if ctx.fresh(&name) {
        let text = fs::read_to_string(ctx.path(&name)).map_err(|e| CliError::output(ctx.path(&name), e))?;
        if let Ok(s) = serde_json::from_str::<TrainSummary>(&text) {
            if let Ok(g) = s.genome.parse() {
                return Ok(g);
            }
        }
    }
    train(ctx, target)
}

// ---------------------------------------------------------------- evaluate

#[derive(Serialize)]
struct ReportArtifact<'a> {
    report: &'a EvaluationReport,
}

/// The bytes of `report_<task>.json`, exposed so that determinism can be
/// checked without touching disk.
pub fn report_bytes(ctx: &Context, report: &EvaluationReport) -> Vec<u8> {
    json_bytes(&ctx.meta, &ReportArtifact { report })
}

pub fn evaluate(ctx: &Context, target: Target, partition: &Partition) -> Result<EvaluationReport, CliError> {
    let st = |e| CliError::stage("evaluate", e);
    let factory = ctx.factory()?;
    let cfg = KFoldConfig {
        scores: ctx.scores.clone(),
        score_policy: ctx.config.thresholds.score_policy(),
        probability_threshold: ctx.config.thresholds.probability_policy(),
        seed: ctx.meta.seeds.kfold,
        partition_method: ctx.config.splitter.method.name().to_string(),
        config_hash: Some(ctx.meta.config_hash.clone()),
    };
    let report = kfold_evaluate(factory.as_ref(), &ctx.data, partition, target, &Tool::ALL, &cfg).map_err(st)?;

    write_atomic(&ctx.path(&format!("report_{target}.json")), &report_bytes(ctx, &report))?;

    let mut metrics = CsvOut::new(
        ctx.path(&format!("metrics_{target}.csv")),
        &["tool", "threshold_policy", "accuracy", "recall", "precision", "f1", "auc", "folds"],
    );
    let mut folds = CsvOut::new(
        ctx.path(&format!("folds_{target}.csv")),
        &[
            "tool", "fold", "n_train", "n_test", "threshold", "tp", "fp", "tn", "fn", "accuracy", "recall",
            "precision", "f1",
        ],
    );
    let mut roc = CsvOut::new(ctx.path(&format!("roc_{target}.csv")), &["tool", "fpr", "tpr"]);
    let mut curves = Vec::new();
    for t in &report.tools {
        let auc = t.roc.as_ref().map_or(f64::NAN, |r| r.auc);
        metrics.row([
            t.tool.clone(),
            t.threshold_policy.clone(),
            num(t.mean.accuracy),
            num(t.mean.recall),
            num(t.mean.precision),
            num(t.mean.f1),
            num(auc),
            t.folds.len().to_string(),
        ]);
        for f in &t.folds {
            let c = &f.confusion;
            folds.row([
                t.tool.clone(),
                f.fold.to_string(),
                f.n_train.to_string(),
                f.n_test.to_string(),
                num(f.threshold),
                c.tp.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
                c.fn_.to_string(),
                num(f.metrics.accuracy),
                num(f.metrics.recall),
                num(f.metrics.precision),
                num(f.metrics.f1),
            ]);
        }
        if let Some(r) = &t.roc {
            let pts: Vec<(f64, f64)> = r.points.iter().map(|p| (p.fpr, p.tpr)).collect();
            for &(x, y) in &pts {
                roc.row([t.tool.clone(), num(x), num(y)]);
            }
            curves.push((format!("{} (AUC {:.3})", t.tool, r.auc), pts));
        }
    }
    metrics.finish(&ctx.meta)?;
    folds.finish(&ctx.meta)?;
    roc.finish(&ctx.meta)?;
    let series: Vec<svg::Series<'_>> = curves
        .iter()
        .map(|(label, pts)| svg::Series {
            label: label.clone(),
            points: pts,
        })
        .collect();
    let chart = svg::roc_chart(&format!("ROC, {target} PONV"), &series);
    write_svg(&ctx.path(&format!("roc_{target}.svg")), &ctx.meta, &chart)?;

    let mut anova = CsvOut::new(
        ctx.path(&format!("anova_{target}.csv")),
        &["f", "p", "df_between", "df_within", "note"],
    );
    match &report.anova {
        Some(a) => anova.row([
            num(a.f),
            num(a.p),
            a.df_between.to_string(),
            a.df_within.to_string(),
            report.anova_note.clone().unwrap_or_default(),
        ]),
        None => anova.row([
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            report.anova_note.clone().unwrap_or_default(),
        ]),
    }
    anova.finish(&ctx.meta)?;
    log::info!(
        "evaluate {target}: pipeline accuracy {:.4}",
        report.tool("pipeline").map_or(f64::NAN, |t| t.mean.accuracy)
    );
    Ok(report)
}

// ---------------------------------------------------------------- explain

/// `m` evenly spaced row indices out of `n`, shifted by `phase` in [0, 1).
fn spread_rows(n: usize, m: usize, phase: f64) -> Vec<usize> {
    if m == 0 || m >= n {
        return (0..n).collect();
    }
    let step = n as f64 / m as f64;
    (0..m).map(|i| ((i as f64 + phase) * step) as usize).collect()
}

fn select(x: &Matrix, rows: &[usize]) -> Matrix {
    x.select_rows(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplainSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub importance: Option<ImportanceVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shap_mean_abs: Option<Vec<(String, f64)>>,
    pub split_gain: Vec<(String, f64)>,
}

pub fn explain(ctx: &Context, target: Target, partition: &Partition, genome: &PipelineGenome) -> Result<ExplainSummary, CliError> {
    let st = |e| CliError::stage("explain", e);
    let seed = ctx.meta.seeds.explain;
    let cfg = &ctx.config.explain;

    let importance = if cfg.ablation {
        let factory = FixedPipeline(genome.clone());
        let v = ablation_importance(&factory, &ctx.data, partition, target, seed).map_err(st)?;
        let mut out = CsvOut::new(
            ctx.path(&format!("importance_{target}.csv")),
            &["feature", "importance", "accuracy_delta", "zeroed"],
        );
        for (i, name) in v.features.iter().enumerate() {
            out.row([
                name.clone(),
                num(v.importance[i]),
                num(v.raw_delta[i]),
                v.zeroed.contains(name).to_string(),
            ]);
        }
        out.row([NOISE_FEATURE.to_string(), String::new(), num(v.noise_delta), String::new()]);
        out.finish(&ctx.meta)?;
        let mut bars: Vec<(String, f64)> = v
            .features
            .iter()
            .cloned()
            .zip(v.importance.iter().copied())
            .filter(|b| b.1 > 0.0)
            .collect();
        bars.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let chart = svg::bar_chart(&format!("Ablation importance, {target} PONV"), &bars);
        write_svg(&ctx.path(&format!("importance_{target}.svg")), &ctx.meta, &chart)?;
        if v.all_zeroed {
            log::warn!("explain {target}: no feature beat the noise reference");
        }
        Some(v)
    } else {
        None
    };

    let fitted = FittedPipeline::fit(genome, &ctx.data, target, ctx.meta.seeds.search).map_err(st)?;
    let names = fitted.feature_names.clone();

    let totals = fitted.model.split_gain_totals();
    let mut gain: Vec<(String, f64)> = names.iter().cloned().zip(totals).collect();
    gain.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut out = CsvOut::new(ctx.path(&format!("gain_{target}.csv")), &["feature", "normalized_gain"]);
    for (name, g) in &gain {
        out.row([name.clone(), num(*g)]);
    }
    out.finish(&ctx.meta)?;

    let shap_mean_abs = if cfg.shap {
        let x = fitted.transform(&ctx.data).map_err(st)?;
        let n = x.n_rows();
        let records = spread_rows(n, cfg.records, 0.0);
        let background = spread_rows(n, cfg.background, 0.5);
        let s = shap_summary(&fitted.model, &select(&x, &records), &select(&x, &background), &names).map_err(st)?;

        let mut header = vec!["record".to_string(), "base_value".into(), "model_output".into()];
        header.extend(s.features.iter().cloned());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut values = CsvOut::new(ctx.path(&format!("shap_values_{target}.csv")), &header);
        for (r, phi) in s.values.iter().enumerate() {
            let output = s.base_value + phi.iter().sum::<f64>();
            let mut row = vec![records[r].to_string(), num(s.base_value), num(output)];
            row.extend(phi.iter().map(|v| num(*v)));
            values.row(row);
        }
        values.finish(&ctx.meta)?;

        let mut summary = CsvOut::new(ctx.path(&format!("shap_summary_{target}.csv")), &["rank", "feature", "mean_abs"]);
        for (i, (f, m)) in s.features.iter().zip(&s.mean_abs).enumerate() {
            summary.row([(i + 1).to_string(), f.clone(), num(*m)]);
        }
        summary.finish(&ctx.meta)?;

        let rows: Vec<(String, Vec<(f64, f64)>)> = s
            .features
            .iter()
            .enumerate()
            .take(20)
            .map(|(j, f)| {
                let pts = s.values.iter().zip(&s.feature_values).map(|(v, xv)| (v[j], xv[j])).collect();
                (f.clone(), pts)
            })
            .collect();
        let chart = svg::shap_strip(&format!("SHAP summary, {target} PONV"), &rows);
        write_svg(&ctx.path(&format!("shap_{target}.svg")), &ctx.meta, &chart)?;
        Some(s.features.iter().cloned().zip(s.mean_abs.iter().copied()).collect())
    } else {
        None
    };

    let summary = ExplainSummary {
        importance,
        shap_mean_abs,
        split_gain: gain,
    };
    write_json(&ctx.path(&format!("explain_{target}.json")), &ctx.meta, &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, Serialize)]
pub struct TaskSummary {
    pub target: Target,
    pub genome: String,
    /// Mean cross-validated accuracy and pooled AUC per tool.
    pub tools: Vec<ToolLine>,
    pub anova_p: Option<f64>,
    pub top_features: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolLine {
    pub tool: String,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub n_records: usize,
    pub n_features: usize,
    pub k: usize,
    pub split_method: String,
    pub split_objective: f64,
    pub tasks: Vec<TaskSummary>,
}

/// Runs every stage for every configured task and writes `summary.json`.
pub fn report(ctx: &Context) -> Result<RunSummary, CliError> {
    stats(ctx)?;
    let partition = split(ctx)?;
    let mut tasks = Vec::new();
    for target in ctx.config.run.task.targets() {
        let genome = train(ctx, target)?;
        let rep = evaluate(ctx, target, &partition)?;
        let ex = explain(ctx, target, &partition, &genome)?;
        let top_features = match &ex.importance {
            Some(v) => {
                let mut pairs: Vec<(String, f64)> = v
                    .features
                    .iter()
                    .cloned()
                    .zip(v.importance.iter().copied())
                    .filter(|p| p.1 > 0.0)
                    .collect();
                pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                pairs
            }
            None => ex.split_gain.iter().filter(|p| p.1 > 0.0).cloned().collect(),
        };
        tasks.push(TaskSummary {
            target,
            genome: genome.to_string(),
            tools: rep
                .tools
                .iter()
                .map(|t| ToolLine {
                    tool: t.tool.clone(),
                    accuracy: t.mean.accuracy,
                    recall: t.mean.recall,
                    precision: t.mean.precision,
                    auc: t.roc.as_ref().map(|r| r.auc),
                })
                .collect(),
            anova_p: rep.anova.as_ref().map(|a| a.p),
            top_features,
        });
    }
    let summary = RunSummary {
        n_records: ctx.data.n_rows(),
        n_features: ctx.data.n_features(),
        k: ctx.config.run.k,
        split_method: ctx.config.splitter.method.name().into(),
        split_objective: partition.objective(),
        tasks,
    };
    write_json(&ctx.path("summary.json"), &ctx.meta, &summary)?;
    Ok(summary)
}
