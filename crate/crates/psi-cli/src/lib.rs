//! `psi`: filter survey comments, classify price direction with LLM judges,
//! integrate their verdicts, build monthly indices and compare them with a
//! reference series.

pub mod config;
pub mod manifest;
pub mod stages;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use psi_core::analytics::Transform;
use psi_core::index::PsiVariant;

pub use config::PipelineConfig;
pub use stages::{Outcome, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "psi", version, about = "Price sentiment index pipeline")]
pub struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "pipeline.toml")]
    pub config: PathBuf,
    /// Reply cache file (overrides the config).
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Seed for the dataset split (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Treat industries missing from the mapping as errors.
    #[arg(long, global = true)]
    pub strict_industry: bool,
    /// Also write long-format series for plotting.
    #[arg(long, global = true)]
    pub emit_plot_data: bool,
    /// Rerun stages even when their inputs are unchanged.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Keep price-related comments.
    Filter,
    /// Ask each judge for a direction label.
    Classify,
    /// Combine the judges' labels into one decision per comment.
    Integrate,
    /// Build the monthly index variants.
    Index,
    /// Lagged correlation and Granger tests against a reference series.
    Evaluate(EvaluateArgs),
    /// Run every stage in order.
    RunAll(EvaluateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvaluateArgs {
    /// Index CSV (default: <output_dir>/index/all.csv).
    #[arg(long)]
    pub psi: Option<PathBuf>,
    /// Reference series CSV with `month,value` rows.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<PsiVariant>,
    /// level, yoy_pct or mom_pct.
    #[arg(long)]
    pub transform: Option<Transform>,
    #[arg(long, allow_negative_numbers = true)]
    pub lag_min: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lag_max: Option<i64>,
    #[arg(long)]
    pub min_overlap: Option<usize>,
    /// Granger lag order.
    #[arg(long)]
    pub max_lag: Option<usize>,
}

impl From<EvaluateArgs> for stages::EvaluateOverrides {
    fn from(a: EvaluateArgs) -> Self {
        stages::EvaluateOverrides {
            psi: a.psi,
            reference: a.reference,
            variant: a.variant,
            transform: a.transform,
            lag_min: a.lag_min,
            lag_max: a.lag_max,
            min_overlap: a.min_overlap,
            max_lag: a.max_lag,
        }
    }
}

/// Loads the config, applies command-line overrides and runs the command.
pub fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(cache) = cli.cache {
        cfg.cache = cache;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.strict_industry |= cli.strict_industry;
    let mut opts = RunOptions {
        force: cli.force,
        emit_plot_data: cli.emit_plot_data,
        ..RunOptions::default()
    };
    match cli.command {
        Command::Filter => stages::cmd_filter(&cfg, &opts),
        Command::Classify => stages::cmd_classify(&cfg, &opts),
        Command::Integrate => stages::cmd_integrate(&cfg, &opts),
        Command::Index => stages::cmd_index(&cfg, &opts),
        Command::Evaluate(args) => {
            opts.evaluate = args.into();
            stages::cmd_evaluate(&cfg, &opts)
        }
        Command::RunAll(args) => {
            opts.evaluate = args.into();
            stages::cmd_run_all(&cfg, &opts)
        }
    }
}
