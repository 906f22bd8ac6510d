//! Command-line workflow: stats, split, train, evaluate, explain and a full
//! report run, all driven by one TOML config.

pub mod config;
pub mod error;
pub mod output;
pub mod stages;
pub mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use ponv_core::dataset::{write_csv, synth_generate};

pub use config::RunConfig;
pub use error::CliError;
use output::write_atomic;
use stages::Context;

/// Environment variable that overrides the config's output directory.
pub const OUT_DIR_ENV: &str = "PONV_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "ponv", version, about = "PONV risk model development workflow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides run.seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Caps the number of worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,

    /// Output directory; beats PONV_OUT_DIR and run.out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Descriptive statistics and correlation matrices.
    Stats,
    /// Distribution-balanced k-fold partition.
    Split,
    /// Pipeline search and a final fit on all records.
    Train,
    /// Cross-validated comparison against the clinical scores.
    Evaluate,
    /// Ablation importance, split gains and SHAP attributions.
    Explain,
    /// Every stage, plus summary.json.
    Report,
    /// Writes the [synthetic] dataset and its schema to the output directory.
    Synth,
}

fn out_dir(cli: &Cli, cfg: &RunConfig, base: &std::path::Path) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    if let Some(o) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(o);
    }
    match &cfg.run.out_dir {
        Some(p) if p.is_absolute() || base.as_os_str().is_empty() => p.clone(),
        Some(p) => base.join(p),
        None => PathBuf::from("out"),
    }
}

/// Parses the config, applies flag overrides and builds the stage context.
pub fn context(cli: &Cli) -> Result<Context, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config", "a config file is required"))?;
    let mut loaded = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        loaded.config.run.seed = seed;
    }
    let out = out_dir(cli, &loaded.config, &loaded.base_dir);
    Context::new(loaded, out)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::config("--workers", "must be positive"));
        }
        // a second call in the same process (tests) keeps the first pool
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("global thread pool already initialised");
        }
    }
    let ctx = context(cli)?;
    let targets = ctx.config.run.task.targets();
    match cli.command {
        Command::Stats => stages::stats(&ctx)?,
        Command::Split => {
            stages::split(&ctx)?;
        }
        Command::Train => {
            for t in targets {
                stages::train(&ctx, t)?;
            }
        }
        Command::Evaluate => {
            let p = stages::ensure_split(&ctx)?;
            for t in targets {
                stages::evaluate(&ctx, t, &p)?;
            }
        }
        Command::Explain => {
            let p = stages::ensure_split(&ctx)?;
            for t in targets {
                let g = stages::ensure_train(&ctx, t)?;
                stages::explain(&ctx, t, &p, &g)?;
            }
        }
        Command::Report => {
            stages::report(&ctx)?;
        }
        Command::Synth => synth(&ctx)?,
    }
    Ok(())
}

fn synth(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx
        .config
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::config("synthetic", "the synth command needs a [synthetic] section"))?;
    let d = synth_generate(cfg, ctx.meta.seeds.data).map_err(CliError::Data)?;
    let mut body = Vec::new();
    write_csv(&d, &mut body).map_err(|e| CliError::stage("synth", e))?;
    output::write_csv_bytes(&ctx.path("synthetic.csv"), &ctx.meta, &body)?;
    let schema = format!("{}{}", ctx.meta.header_lines(), d.schema().to_toml_string());
    write_atomic(&ctx.path("synthetic_schema.toml"), schema.as_bytes())
}
