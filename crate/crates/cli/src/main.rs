//! `tapol`: generate experiment logs, learn assignment policies and evaluate
//! them offline.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "TAPOL_OUT";

#[derive(Debug, Parser)]
#[command(name = "tapol", version, about = "Treatment-assignment policy learning from randomized experiments")]
pub struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML run config; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (default: $TAPOL_OUT, then the current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic experiment log with its ground truth.
    Gen(GenArgs),
    /// Fit policies on a whole dataset with inner-CV hyperparameter selection.
    Train(TrainArgs),
    /// Nested-CV evaluation of approaches, or evaluation of saved policies.
    Eval(EvalArgs),
    /// Learning curves over training-set sizes.
    Curve(CurveArgs),
    /// Every approach scored on every task.
    Crosstask(CrossTaskArgs),
    /// Check a dataset and optional truth and policy files.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Named scenario preset.
    #[arg(long)]
    pub preset: Option<String>,
    /// Scenario TOML file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Number of rows.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the response surface (kept apart from the sampling seed).
    #[arg(long)]
    pub structure_seed: Option<u64>,
    /// Base name of the written files.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Dataset file (.csv with its .meta.json sidecar, or binary).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Truth sidecar of a generated dataset.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct CvArgs {
    #[arg(long)]
    pub outer_folds: Option<usize>,
    #[arg(long)]
    pub inner_folds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub max_depth: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub min_samples_leaf: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub min_loss_reduction: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated approaches: op, cp, tp, best-on-average, control.
    #[arg(long)]
    pub approach: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub cv: CvArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub approach: Option<String>,
    /// Saved policy files to score on the dataset instead of running CV.
    #[arg(long, value_delimiter = ',')]
    pub policy: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub cv: CvArgs,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub approach: Option<String>,
    /// Explicit training sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Number of geometric sizes when --sizes is absent.
    #[arg(long)]
    pub size_count: Option<usize>,
    /// Smallest geometric size when --sizes is absent.
    #[arg(long)]
    pub min_size: Option<usize>,
    /// Metric plotted in the SVG.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub cv: CvArgs,
}

#[derive(Debug, Args)]
pub struct CrossTaskArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub approach: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub cv: CvArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',')]
    pub policy: Option<Vec<PathBuf>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = std::panic::catch_unwind(|| commands::run(cli))
        .unwrap_or_else(|_| Err(CliError::Internal("internal error (panic)".into())));
    match outcome {
        Ok(manifest) => {
            match serde_json::to_string_pretty(&manifest) {
                Ok(s) => println!("{s}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(3);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
