//! `coopoffload`: generate or fit contact networks, estimate and plan
//! offloads, simulate strategies and validate the estimator.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "coopoffload",
    version,
    about = "Cooperative data offloading toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scenario {
    /// Two relay paths and a weak direct link, calibrated for a 20-unit item.
    TwoRelay,
    /// A node whose direct link is good enough that it never offloads.
    HotDirect,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Heuristic,
    Oracle,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic or built-in network file.
    Generate {
        /// Synthetic generator settings (JSON); missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of mobile nodes.
        #[arg(long)]
        nodes: Option<usize>,
        /// Write a built-in instance instead of a synthetic network.
        #[arg(long, value_enum, conflicts_with_all = ["config", "seed", "nodes"])]
        scenario: Option<Scenario>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a network file from a contact trace CSV.
    Fit {
        #[arg(long)]
        trace: PathBuf,
        /// Link data rate used to turn contact durations into capacities.
        #[arg(long)]
        rate: f64,
        /// Fraction of the trace's time span used for fitting.
        #[arg(long, default_value_t = 0.5)]
        warmup: f64,
        #[arg(long, default_value_t = 5)]
        min_contacts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print individual and cooperative delivery estimates and the plan.
    Estimate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        source: usize,
        #[arg(long)]
        size: f64,
        #[arg(long)]
        deadline: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan an offload and write the plan as JSON.
    Plan {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        source: usize,
        #[arg(long)]
        size: f64,
        #[arg(long)]
        deadline: f64,
        #[arg(long, value_enum, default_value_t = Method::Heuristic)]
        method: Method,
        /// Oracle size step; defaults to half the smallest β.
        #[arg(long)]
        granularity: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment and write per-task and summary CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<u64>,
        /// Directory for results.csv and summary.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare estimated and simulated delivery probabilities on a grid.
    Validate {
        /// Network file; the path is given by --route.
        #[arg(long, requires = "route")]
        network: Option<PathBuf>,
        /// Comma-separated node ids.
        #[arg(long, value_delimiter = ',')]
        route: Vec<usize>,
        /// A hop as `lambda,alpha,beta,rate`; repeat for each hop.
        #[arg(long, conflicts_with = "network")]
        hop: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        deadlines: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
