//! `senns`: train sparse contrastive feature extractors, project data
//! through them, and sanity-check the gradients.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{run_eval, run_extract, run_gradcheck, run_pairs, run_train};
use config::DataArgs;

#[derive(Parser)]
#[command(
    name = "senns",
    version,
    about = "Sparse contrastive feature extraction: train, extract, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a feature extractor and write the model, telemetry, and a
    /// run summary
    Train(TrainArgs),
    /// Project a dataset through a trained model into a feature CSV
    Extract(ExtractArgs),
    /// Evaluate a feature CSV: kNN accuracy, scatter ratio, sparsity
    Eval(EvalArgs),
    /// Dump the training pair list as CSV
    Pairs(PairsArgs),
    /// Compare the analytic gradient against central finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// TOML config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Non-input layer sizes, e.g. 8,2 (last = feature dimension)
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    /// Transfer kinds per non-input layer (default: tanh..., linear)
    #[arg(long, value_delimiter = ',')]
    pub transfer: Option<Vec<String>>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda3: Option<f64>,
    #[arg(long)]
    pub lambda4: Option<f64>,
    /// Learning rate
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Relative objective-change convergence threshold
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Pair construction: full | heuristic
    #[arg(long)]
    pub pair_mode: Option<String>,
    /// Same-class fan-out for heuristic pairs
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub exclude_self_pairs: bool,
    /// Cap the worker pool (0 or unset: library default)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Accumulate pair gradients in the reference order
    #[arg(long)]
    pub reproducible: bool,
    /// Halve the learning rate whenever a step increases the objective
    #[arg(long)]
    pub halve_on_increase: bool,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    #[arg(long)]
    pub out_telemetry: Option<PathBuf>,
    #[arg(long)]
    pub out_summary: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ExtractArgs {
    /// Trained model file
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Seed for synthetic dataset kinds
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output feature CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Feature CSV (label in the last column)
    pub features: PathBuf,
    /// Neighbors for the kNN vote; leave-one-out unless --test is given
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Separate test feature CSV classified against `features`
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Near-zero threshold for sparsity counting
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Also write the report as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct PairsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pair construction: full | heuristic
    #[arg(long)]
    pub pair_mode: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub exclude_self_pairs: bool,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output CSV (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for the random check instance
    #[arg(long)]
    pub seed: Option<u64>,
    /// Non-input layer sizes of the check network
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda3: Option<f64>,
    #[arg(long)]
    pub lambda4: Option<f64>,
    /// Finite-difference step
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    /// Negate the analytic gradient before comparing (fault injection
    /// for this command's own failure path)
    #[arg(long, hide = true)]
    pub sabotage_sign: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => run_train(args),
        Command::Extract(args) => run_extract(args),
        Command::Eval(args) => run_eval(args),
        Command::Pairs(args) => run_pairs(args),
        Command::Gradcheck(args) => run_gradcheck(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
