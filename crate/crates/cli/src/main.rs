use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use netest_core::Error;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "netest", version, about = "Minimum-cost networked estimator design")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct GlobalArgs {
    /// Problem file (JSON) or edge list; for `discretize`, a numeric matrix.
    #[arg(long, short, global = true)]
    input: Option<PathBuf>,

    /// Write the JSON result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Directory for Graphviz renderings.
    #[arg(long, global = true)]
    dot: Option<PathBuf>,

    /// Seed for the generic-rank oracle.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Magnitude threshold when extracting structure from numeric matrices.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Allow more agents than parent SCCs; surplus agents measure nothing.
    #[arg(long, global = true)]
    allow_extra_agents: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Euler,
    Tustin,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report SCCs, parent SCCs and the minimum number of agents.
    Analyze,
    /// Compute the minimum-cost measurement assignment and network.
    Design,
    /// Check networked observability of a stored design.
    Verify {
        #[arg(long)]
        solution: PathBuf,
        /// Also run the generic-rank oracle with this many trials.
        #[arg(long)]
        oracle: Option<usize>,
    },
    /// Sample a continuous-time matrix and extract its structure.
    Discretize {
        #[arg(long = "step", short = 'T')]
        step: f64,
        #[arg(long, value_enum, default_value = "euler")]
        method: Method,
    },
    /// Generic-rank Monte-Carlo check of a measurement set or a stored design.
    Oracle {
        /// Comma-separated measured states (0-based).
        #[arg(long, value_delimiter = ',', conflicts_with = "solution")]
        measured: Option<Vec<usize>>,
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// Process exit status for each failure class.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::Parse { .. } => 2,
        Error::Singular { .. }
        | Error::AgentCountMismatch { .. }
        | Error::InfeasibleScc { .. }
        | Error::InfeasibleAssignment { .. }
        | Error::Disconnected { .. } => 3,
        Error::NotSelfDamped { .. } | Error::Asymmetric { .. } | Error::SizeGuard { .. } => 4,
        Error::VerificationFailed => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli.global, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {}", err.kind(), err.to_string().replace('\n', " "));
            ExitCode::from(exit_code(&err))
        }
    }
}
