//! `histories`: evaluate measurement-sequence scenarios from the command line.

mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use histories_core::linalg::DEFAULT_CLUSTER_TOL;
use histories_core::sampler::SampleMethod;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "histories", version, about = "Probabilities of measurement sequences from virtual-path amplitudes")]
struct Cli {
    /// Evaluation route for probabilities.
    #[arg(long, global = true, value_enum, default_value_t = StrategyArg::Auto)]
    strategy: StrategyArg,

    /// Cross-check against the path sum and the trace formula; exit 1 if they
    /// disagree by more than 1e-8.
    #[arg(long, global = true)]
    oracle: bool,

    /// Maximum number of virtual paths to enumerate.
    #[arg(long, global = true, value_name = "N")]
    budget: Option<u128>,

    /// Tolerance for grouping eigenvalues and matching outcome values.
    #[arg(long, global = true, value_name = "X", default_value_t = DEFAULT_CLUSTER_TOL)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Auto,
    PathSum,
    Contraction,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Probability of one outcome string, given as eigenvalues in time order.
    Prob {
        /// Scenario file or `builtin:<name>?<param>=<value>&...`.
        scenario: String,
        /// One eigenvalue per measurement; commas also separate values.
        #[arg(required = true, allow_negative_numbers = true)]
        outcomes: Vec<String>,
    },
    /// CSV of every outcome string and its probability.
    Distribution { scenario: String },
    /// CSV of virtual paths and their amplitudes.
    Paths {
        scenario: String,
        /// Only paths with |A| > 1e-12.
        #[arg(long)]
        nonzero: bool,
    },
    /// Weak value of a measurement between preparation and post-selection.
    WeakValue {
        scenario: String,
        label: String,
        /// Also simulate a pointer with coupling G and DIM positions.
        #[arg(long, num_args = 2, value_names = ["G", "DIM"])]
        pointer: Option<Vec<String>>,
    },
    /// Seeded sample of outcome strings, reported as JSON.
    Sample {
        scenario: String,
        n: u64,
        #[arg(default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = MethodArg::InverseCdf)]
        method: MethodArg,
    },
    /// CSV of the distribution of a builtin over a parameter grid.
    Sweep {
        /// Builtin name, optionally with fixed parameters (`epr?theta=0.2`).
        builtin: String,
        parameter: String,
        #[arg(allow_negative_numbers = true)]
        from: String,
        #[arg(allow_negative_numbers = true)]
        to: String,
        steps: usize,
    },
    /// Check a scenario and report every problem found.
    Validate { scenario: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    InverseCdf,
    Sequential,
}

impl From<MethodArg> for SampleMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::InverseCdf => SampleMethod::InverseCdf,
            MethodArg::Sequential => SampleMethod::Sequential,
        }
    }
}

fn run(cli: &Cli, out: &mut String) -> Result<(), CliError> {
    let ctx = commands::Context::new(cli.strategy, cli.oracle, cli.budget, cli.tol)?;
    match &cli.command {
        Command::Prob { scenario, outcomes } => ctx.prob(scenario, outcomes, out),
        Command::Distribution { scenario } => ctx.distribution(scenario, out),
        Command::Paths { scenario, nonzero } => ctx.paths(scenario, *nonzero, out),
        Command::WeakValue { scenario, label, pointer } => ctx.weak_value(scenario, label, pointer.as_deref(), out),
        Command::Sample { scenario, n, seed, method } => ctx.sample(scenario, *n, *seed, (*method).into(), out),
        Command::Sweep { builtin, parameter, from, to, steps } => ctx.sweep(builtin, parameter, from, to, *steps, out),
        Command::Validate { scenario } => ctx.validate(scenario, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(commands::EXIT_USAGE),
            };
        }
    };
    let mut out = String::new();
    let result = run(&cli, &mut out);
    // Payload first: an oracle failure still prints what was computed.
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(out.as_bytes());
    let _ = stdout.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
