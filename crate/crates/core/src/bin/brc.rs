//! Command-line driver for balanced reservoir-computing experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use balanced_rc::cli::{self, RunContext};
use balanced_rc::hyperopt::Strategy;

#[derive(Parser)]
#[command(
    name = "brc",
    about = "Balanced reservoir computing: infer attracting basins from short guiding series",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(clap::Args)]
struct CommonOpts {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root (default: config out_dir, then $BRC_OUT_DIR, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and write the training and testing datasets.
    GenData {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Search the hyperparameter space and save the best machine.
    Search {
        #[command(flatten)]
        opts: CommonOpts,
        /// Override the config's search strategy.
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
    },
    /// Train a machine with the config's explicit hyperparameters.
    Train {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Infer the basin map and report its accuracy.
    InferBasin {
        #[command(flatten)]
        opts: CommonOpts,
        /// Reuse a previously saved machine file.
        #[arg(long)]
        machine: Option<PathBuf>,
    },
    /// Sweep the dynamical-noise amplitude and tabulate accuracies.
    SweepNoise {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Compute the ground-truth basin map by model simulation.
    GroundTruth {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run the built-in invariant suite.
    Verify,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StrategyArg {
    Random,
    Surrogate,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Random => Strategy::Random,
            StrategyArg::Surrogate => Strategy::Surrogate,
        }
    }
}

fn load(opts: &CommonOpts) -> Result<RunContext, cli::CliError> {
    RunContext::load(&opts.config, opts.seed, opts.out.clone())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(workers) = args.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("failed to size the worker pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &args.command {
        Command::GenData { opts } => load(opts).and_then(|ctx| cli::gen_data(&ctx).map(|_| ())),
        Command::Search { opts, strategy } => {
            load(opts).and_then(|ctx| cli::search(&ctx, strategy.map(Into::into)).map(|_| ()))
        }
        Command::Train { opts } => load(opts).and_then(|ctx| cli::train(&ctx, 0).map(|_| ())),
        Command::InferBasin { opts, machine } => {
            load(opts).and_then(|ctx| cli::infer(&ctx, machine.as_deref()).map(|_| ()))
        }
        Command::SweepNoise { opts } => load(opts).and_then(|ctx| cli::sweep_noise(&ctx).map(|_| ())),
        Command::GroundTruth { opts } => load(opts).and_then(|ctx| cli::ground_truth(&ctx).map(|_| ())),
        Command::Verify => cli::verify(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
