//! `spikelab`: analytics, simulation, inference and self-checks for spiked
//! covariance models.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0  | success |
//! | 1  | statistical failure (a goodness-of-fit threshold or check failed) |
//! | 2  | a spike lies in the critical interval or is not separated from the bulk |
//! | 64 | usage error: bad flags or an invalid configuration |
//! | 65 | malformed input data |
//! | 66 | input file cannot be read |
//! | 70 | internal numerical failure |
//! | 74 | output cannot be written |

mod cmd;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use exit::Failure;

#[derive(Debug, Parser)]
#[command(name = "spikelab", version, about = "Spiked covariance laboratory")]
struct Cli {
    /// Maximum worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Progress messages on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntryArg {
    Gaussian,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Gaussian,
    Binary,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Resolvent,
    Sesquiform,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print spike maps, limit variances and support as JSON.
    Limits {
        /// Dimension-to-sample-size ratio y = p/n in (0, 1].
        #[arg(long)]
        y: f64,
        /// Population spike; repeat for several.
        #[arg(long = "alpha", required = true)]
        alphas: Vec<f64>,
        /// Bulk atom `value:weight`; repeat for several. Unit bulk when absent.
        #[arg(long = "bulk", value_parser = cmd::limits::parse_atom)]
        bulk: Vec<(f64, f64)>,
        /// Entry distribution for the variance formula.
        #[arg(long, value_enum, default_value_t = EntryArg::Gaussian)]
        entry: EntryArg,
    },
    /// Run a Monte Carlo experiment described by a JSON config.
    Simulate {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Estimate spikes from an observed spectrum (one eigenvalue per line).
    Infer {
        spectrum: PathBuf,
        #[arg(long)]
        y: f64,
        /// Sample size of the observed data.
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = VarianceArg::Gaussian)]
        variance_model: VarianceArg,
        /// Excess kurtosis for `--variance-model custom`.
        #[arg(long)]
        beta: Option<f64>,
        /// Confidence level of the intervals.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Run a numeric self-check suite and print a pass/fail table.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Base seed of the simulated suites.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Limits { y, alphas, bulk, entry } => cmd::limits::run(y, &alphas, &bulk, entry),
        Command::Simulate { config, output_dir } => cmd::simulate::run(&config, output_dir, cli.verbose),
        Command::Infer { spectrum, y, n, variance_model, beta, level } => {
            cmd::infer::run(&spectrum, y, n, variance_model, beta, level)
        }
        Command::Verify { suite, seed } => cmd::verify::run(suite, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("spikelab: {f}");
            ExitCode::from(f.code())
        }
    }
}
