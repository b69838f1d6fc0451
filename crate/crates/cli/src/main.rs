//! `sara`: tie inference, scenario runs, sweeps, stability checks and reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Socially-aware resource allocation for D2D small-cell networks.
///
/// Exit codes: 0 success, 1 usage or input error, 2 a run hit its round cap,
/// 3 a matching failed stability verification.
#[derive(Debug, Parser)]
#[command(name = "sara", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Infer the social-tie matrix of the highest-degree members of an ego network.
    InferTies {
        /// SNAP ego-Facebook directory, or `surrogate` for a generated network.
        #[arg(long, default_value = "surrogate")]
        dataset: String,
        #[arg(long, default_value_t = 0)]
        ego: u64,
        /// Number of users to keep.
        #[arg(long, default_value_t = 80)]
        users: usize,
        /// Output tie matrix (CSV with a header of node ids).
        #[arg(long)]
        out: PathBuf,
        /// Learner hyperparameters as `key = value` lines.
        #[arg(long)]
        hyper: Option<PathBuf>,
        /// Also write the fitted model parameters here.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one scenario over its seeds and write metrics, states and traces.
    Run {
        /// Scenario TOML; `SARA_<SECTION>__<KEY>` variables override its keys.
        #[arg(long)]
        config: PathBuf,
        /// Tie matrix CSV, or `synthetic` for the surrogate ego network.
        #[arg(long)]
        z: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// First seed; the config's seed count is kept.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario once per value of one config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted config key, e.g. `network.ues` or `spectrum.n3`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-check the saved final matchings of a `run` directory.
    Verify {
        /// Directory written by `sara run`.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Collect the reports under a directory into one CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Summary CSV.
        #[arg(long)]
        out: PathBuf,
        /// Long-format plot data of any sweeps found.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
