//! `geomech`: run scenarios through the simulation and verification
//! pipelines.
//!
//! Exit codes: 0 pass, 1 usage, 2 validation, 3 numerical failure,
//! 4 verification failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use commands::{Check, ResidualKind, EXIT_USAGE, EXIT_VERIFICATION};
use geomech::analysis::DEFAULT_TOLERANCE;

#[derive(Parser, Debug)]
#[command(name = "geomech", version, about = "Second-order dynamics on pseudo-Riemannian charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate from the scenario's initial state; writes a CSV trajectory and a JSON summary.
    Simulate {
        scenario: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t_end: f64,
        /// Output spacing in time (default: every accepted step).
        #[arg(long)]
        stride: Option<f64>,
        /// CSV destination (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary destination (default: stdout, or stderr when the CSV goes to stdout).
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Correct the acceleration so that tau_dot stays constant.
        #[arg(long)]
        time_constrained: bool,
    },
    /// Conservative and relativistic verdicts for the work form.
    Classify {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the candidate field as an intermediate integral.
    VerifyField {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Checks that decide the exit code (default: all).
        #[arg(long, value_delimiter = ',')]
        checks: Vec<Check>,
        /// Also flow from this many sample points (the initial point, if any, is always used).
        #[arg(long, default_value_t = 0)]
        consistency_starts: usize,
        #[arg(long, default_value_t = 1.0)]
        consistency_t_end: f64,
        #[arg(long, default_value_t = 1e-6)]
        consistency_tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wave-equation residuals of the candidate phase.
    Residual {
        #[arg(value_enum)]
        kind: ResidualKind,
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Include every evaluated point in the report.
        #[arg(long)]
        per_point: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolved Newton equation at one state.
    Derive {
        scenario: PathBuf,
        /// State as "x1,..,xn;v1,..,vn".
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in metrics with their component expressions.
    Catalog {
        /// Dimension used for presets defined in every dimension.
        #[arg(long, default_value_t = 2)]
        dimension: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the scenario in canonical form.
    Normalize {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> commands::Outcome {
    match cli.command {
        Command::Simulate { scenario, t_end, stride, out, summary, time_constrained } => {
            commands::simulate(&scenario, &commands::SimulateOptions { t_end, stride, out, summary, time_constrained })
        }
        Command::Classify { scenario, out } => commands::classify(&scenario, out.as_deref()),
        Command::VerifyField { scenario, tolerance, checks, consistency_starts, consistency_t_end, consistency_tolerance, out } => {
            let opts = commands::VerifyOptions { tolerance, checks, consistency_starts, consistency_t_end, consistency_tolerance, out };
            commands::verify_field(&scenario, &opts)
        }
        Command::Residual { kind, scenario, tolerance, per_point, out } => {
            commands::residual(kind, &scenario, &commands::ResidualOptions { tolerance, per_point, out })
        }
        Command::Derive { scenario, at, out } => commands::derive(&scenario, &at, out.as_deref()),
        Command::Catalog { dimension, out } => commands::catalog(dimension, out.as_deref()),
        Command::Normalize { scenario, out } => commands::normalize(&scenario, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFICATION),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
