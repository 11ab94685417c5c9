//! Batch command-line surface over the simgat library.
//!
//! Every subcommand writes its artifacts into `--out DIR` plus a
//! `manifest.json` recording input hashes, config, seed and wall time.
//! Exit codes: 0 success, 1 validation/computation error, 2 usage error.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "simgat", version, about = "Business-cluster flow prediction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic city with known ground truth
    Synth(commands::SynthArgs),
    /// Detect business clusters from a POI table
    Cluster(commands::ClusterArgs),
    /// Build per-mode travel-cost matrices from a road network
    Network(commands::NetworkArgs),
    /// Calibrate gravity-model exponents against observed flows
    FitGravity(commands::FitGravityArgs),
    /// Calibrate Huff destination-choice parameters
    FitHuff(commands::FitHuffArgs),
    /// Train the flow predictor and its baselines
    Train(commands::TrainArgs),
    /// Hyperparameter grid search
    Grid(commands::GridArgs),
    /// Evaluate a checkpoint on observed flows
    Eval(commands::EvalArgs),
    /// DeepLIFT feature attributions for chosen dates
    Attribute(commands::AttributeArgs),
    /// Finite-difference check of the model gradients
    Gradcheck(commands::GradcheckArgs),
    /// Parameter inventory of a checkpoint
    Describe(commands::DescribeArgs),
}

fn init_threads() -> Result<(), String> {
    match std::env::var("SIMGAT_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .map_err(|_| format!("SIMGAT_THREADS={v:?} is not a thread count"))?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| e.to_string())
        }
        Err(_) => Ok(()),
    }
}

fn main() {
    let cli = Cli::parse(); // clap exits 2 with usage text on parse errors
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        std::process::exit(2);
    }
    let result = match cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Cluster(args) => commands::cluster(args),
        Command::Network(args) => commands::network(args),
        Command::FitGravity(args) => commands::fit_gravity(args),
        Command::FitHuff(args) => commands::fit_huff(args),
        Command::Train(args) => commands::train(args),
        Command::Grid(args) => commands::grid(args),
        Command::Eval(args) => commands::eval(args),
        Command::Attribute(args) => commands::attribute(args),
        Command::Gradcheck(args) => commands::gradcheck(args),
        Command::Describe(args) => commands::describe(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
