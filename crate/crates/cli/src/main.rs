//! `symog`: pretrain, regularize, quantize, evaluate and report.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use symog::train::LrDecay;

#[derive(Parser)]
#[command(name = "symog", version, about = "Fixed-point quantization-aware training and multiplication-free inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a float baseline from scratch.
    Pretrain(PretrainArgs),
    /// Regularized fixed-point training from a float checkpoint.
    Train(TrainArgs),
    /// Export a checkpoint as a packed fixed-point model.
    Quantize(QuantizeArgs),
    /// Evaluate a fixed-point model on the test split.
    Eval(EvalArgs),
    /// Turn a telemetry log into plot-ready CSV tables.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Decay {
    Geometric,
    Linear,
}

impl From<Decay> for LrDecay {
    fn from(d: Decay) -> Self {
        match d {
            Decay::Geometric => LrDecay::Geometric,
            Decay::Linear => LrDecay::Linear,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Architecture: `lenet5` or `mlp:<in>,<hidden>,...,<classes>`.
    #[arg(long, default_value = "lenet5")]
    arch: String,
    /// Directory holding the four MNIST IDX files.
    #[arg(long, env = "SYMOG_DATA")]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Run directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    lr0: f64,
    #[arg(long = "lrE", default_value_t = 0.001)]
    lr_end: f64,
    #[arg(long, value_enum, default_value = "geometric")]
    lr_decay: Decay,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 5e-4)]
    weight_decay: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Float checkpoint to start from (usually a pretrain run's model.symc).
    #[arg(long)]
    init: PathBuf,
    #[arg(long, default_value_t = 2)]
    bits: u8,
    #[arg(long, default_value_t = 10.0)]
    lambda0: f64,
    /// Growth rate of λ; defaults to 9/E.
    #[arg(long)]
    alpha: Option<f64>,
    /// Disable post-update weight clipping.
    #[arg(long)]
    no_clip: bool,
}

#[derive(Args)]
struct QuantizeArgs {
    /// Float checkpoint to export.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Per-layer exponents from a train run (`quant_plan.json`); selected afresh if omitted.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Bit width when no plan is given.
    #[arg(long, default_value_t = 2)]
    bits: u8,
    /// Output SYMQ file; the per-layer summary goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// SYMQ model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, env = "SYMOG_DATA")]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// telemetry.csv from a train run.
    #[arg(long)]
    telemetry: PathBuf,
    /// Directory for histograms.csv and switch_rates.csv.
    #[arg(long)]
    out: PathBuf,
}

/// Failure classes mapped onto exit codes.
pub enum Failure {
    /// Bad invocation: exit code 2.
    Usage(String),
    /// Anything that went wrong while running: exit code 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<symog::Error> for Failure {
    fn from(e: symog::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Pretrain(a) => commands::pretrain(a),
        Command::Train(a) => commands::train(a),
        Command::Quantize(a) => commands::quantize(a),
        Command::Eval(a) => commands::eval(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `symog --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
