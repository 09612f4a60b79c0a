#![allow(clippy::needless_range_loop)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eecap_core::{Error, Objective, Scenario};

mod commands;
mod csv;

#[derive(Parser)]
#[command(
    name = "eecap",
    version,
    about = "Energy-efficient channel access optimization for IR-UWB body area networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Ee,
    Logee,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Ee => Objective::Ee,
            ObjectiveArg::Logee => Objective::LogEe,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Nodes,
    Rate,
    Distance,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one scenario, or evaluate its [evaluate] operating point.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's solver objective.
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Also write the per-iteration trace as CSV to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Solve a family of scenarios along one axis.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Nodes axis only: split this aggregate rate (bit/s) evenly instead
        /// of giving every node the first node's requirement.
        #[arg(long)]
        total_rate: Option<f64>,
    },
    /// Compare a slot-level simulation against the analytic metrics.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        slots: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the raw simulation report as a CSV row to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Process outcome: success, or an error with its exit status.
pub enum Failure {
    Error(Error),
    /// The simulation disagreed with the analytic model.
    Mismatch(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn load(path: &PathBuf, objective: Option<ObjectiveArg>) -> Result<Scenario, Error> {
    let mut scenario = Scenario::load(path)?;
    if let Some(o) = objective {
        scenario.solver.objective = o.into();
    }
    Ok(scenario)
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Solve {
            scenario,
            objective,
            trace,
        } => {
            let s = load(&scenario, objective)?;
            commands::solve(&s, trace.as_deref())
        }
        Command::Sweep {
            scenario,
            axis,
            from,
            to,
            steps,
            objective,
            total_rate,
        } => {
            let s = load(&scenario, objective)?;
            let spec = commands::SweepSpec {
                axis,
                from,
                to,
                steps,
                total_rate,
            };
            Ok(commands::sweep(&s, &spec)?)
        }
        Command::Validate {
            scenario,
            slots,
            seed,
            report,
        } => {
            let s = load(&scenario, None)?;
            commands::validate(&s, slots, seed, report.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
        Err(Failure::Mismatch(out)) => {
            print!("{out}");
            eprintln!(
                "error: simulation disagrees with the analytic model (|z| > {})",
                commands::Z_LIMIT
            );
            ExitCode::from(3)
        }
    }
}
