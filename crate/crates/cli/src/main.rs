//! `mipgnn`: generate instances, label them with solution-pool biases,
//! train a bias predictor, and run guided branch-and-bound experiments.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mipgnn", version, about)]
pub struct Cli {
    /// Base seed; per-instance seeds are derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-instance work.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write random instances as `.blp` files plus a manifest.
    Generate(GenerateArgs),
    /// Collect solution pools and write `.labels.json` bias files.
    Label(LabelArgs),
    /// Train a bias predictor on labelled instances.
    Train(TrainArgs),
    /// Write bias predictions of a trained model.
    Predict(PredictArgs),
    /// Run branch-and-bound and write `.report.json` files.
    Solve(SolveArgs),
    /// Check the MWU feasibility and MAE bound of one instance.
    Mwu(MwuArgs),
    /// Compare two directories of solve reports.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GispEr,
    RandomBlp,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "gisp-er")]
    pub family: Family,
    /// Graph nodes (gisp-er) or variables (random-blp).
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    /// Edge probability (gisp-er) or row density (random-blp).
    #[arg(long, default_value_t = 0.15)]
    pub p: f64,
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    /// Constraints (random-blp only).
    #[arg(long, default_value_t = 5)]
    pub rows: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct LabelArgs {
    /// `.blp` files or directories containing them.
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Stop after this many pool solutions.
    #[arg(long, default_value_t = 1000)]
    pub target: usize,
    /// Seconds per instance.
    #[arg(long)]
    pub time_limit: Option<f64>,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct TrainArgs {
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    /// Directory holding `<id>.labels.json` files.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value = "sage-err")]
    pub arch: String,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub validation_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long)]
    pub class_weighting: bool,
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct PredictArgs {
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct SolveArgs {
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    #[arg(long, default_value = "best-bound")]
    pub strategy: String,
    /// Model used to predict biases for guided strategies.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Seconds per instance.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub node_limit: Option<usize>,
    /// Count model inference time against the solve clock.
    #[arg(long)]
    pub charge_inference: bool,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct MwuArgs {
    pub instance: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Label file whose biases are checked against the MAE bound.
    #[arg(long)]
    pub bias: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct EvalArgs {
    /// Report directory of strategy A.
    pub a: PathBuf,
    /// Report directory of strategy B.
    pub b: PathBuf,
    /// Primal-integral horizon in seconds; defaults to the largest time
    /// limit recorded in the reports.
    #[arg(long)]
    pub horizon: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
