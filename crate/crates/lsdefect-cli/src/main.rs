//! Batch pipeline driver: generate, detect, evaluate, report.
//!
//! Every command exits nonzero on error with a one-line machine-parseable
//! `error[CODE] message` on stderr; exit 0 means all declared outputs exist.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsdefect::synth::Split;
use thiserror::Error;

use commands::ReportSource;
use config::RunConfig;

/// Driver errors: toolkit errors plus configuration problems.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lsdefect::Error),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Config(_) => "E_CONFIG",
        }
    }
}

#[derive(Parser)]
#[command(
    name = "lsdefect",
    version,
    about = "Line/space SEM defect inspection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; defaults apply for missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the base seed of the scene spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-image work.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (images, annotations, manifest).
    Gen {
        #[command(flatten)]
        common: CommonArgs,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Use this many images per class for every split.
        #[arg(long)]
        count_per_class: Option<u32>,
        /// Add this many clean (defect-free) images to every split.
        #[arg(long)]
        clean_per_split: Option<u32>,
    },
    /// Run the rule-based segmentor over one split and write predictions.
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset directory (as written by `gen`).
        #[arg(long)]
        data: PathBuf,
        /// Split to process.
        #[arg(long, default_value = "test")]
        split: Split,
        /// Prediction file to write (JSON lines).
        #[arg(long)]
        out: PathBuf,
        /// Override the minimum residual component area.
        #[arg(long)]
        min_area: Option<u64>,
    },
    /// Evaluate predictions against ground truth (AP50 per class, mAP).
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Prediction file (from `detect` or an external model).
        #[arg(long)]
        pred: PathBuf,
        /// Directory for eval.json and eval.txt.
        #[arg(long)]
        out: PathBuf,
        /// Override the score threshold applied before matching.
        #[arg(long)]
        score_threshold: Option<f64>,
        /// Override the IoU threshold for matching.
        #[arg(long)]
        iou_threshold: Option<f64>,
    },
    /// Write the morphometry report (CSV, stats, per-class folders).
    Report {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Instance source.
        #[arg(long, value_enum, default_value_t = ReportSource::Pred)]
        source: ReportSource,
        /// Prediction file (required when --source is pred).
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: gen, detect, eval, report under one directory.
    All {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        count_per_class: Option<u32>,
        #[arg(long)]
        clean_per_split: Option<u32>,
    },
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.scene.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen {
            common,
            out,
            count_per_class,
            clean_per_split,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = count_per_class {
                cfg.plan = lsdefect::synth::SplitPlan::uniform(n);
            }
            if let Some(c) = clean_per_split {
                cfg.plan.clean_per_split = [c, c, c];
            }
            commands::cmd_gen(&cfg, &out)?;
            Ok(())
        }
        Command::Detect {
            common,
            data,
            split,
            out,
            min_area,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(a) = min_area {
                cfg.rules.min_area = a;
            }
            commands::cmd_detect(&cfg, &data, split, &out, common.jobs)?;
            Ok(())
        }
        Command::Eval {
            common,
            data,
            split,
            pred,
            out,
            score_threshold,
            iou_threshold,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = score_threshold {
                cfg.eval.score_threshold = s;
            }
            if let Some(t) = iou_threshold {
                cfg.eval.iou_threshold = t;
            }
            commands::cmd_eval(&cfg, &data, split, &pred, &out)?;
            Ok(())
        }
        Command::Report {
            common: _,
            data,
            split,
            source,
            pred,
            out,
        } => {
            commands::cmd_report(&data, split, source, pred.as_deref(), &out)?;
            Ok(())
        }
        Command::All {
            common,
            out,
            split,
            count_per_class,
            clean_per_split,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = count_per_class {
                cfg.plan = lsdefect::synth::SplitPlan::uniform(n);
            }
            if let Some(c) = clean_per_split {
                cfg.plan.clean_per_split = [c, c, c];
            }
            commands::cmd_all(&cfg, &out, split, common.jobs)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}] {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
