//! `purc` — solve, estimate, simulate, screen, and validate perturbed-utility
//! route choice models from the command line.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use purc_core::CoreError;

#[derive(Parser)]
#[command(name = "purc", version, about = "Perturbed-utility route choice toolkit")]
struct Cli {
    /// Worker threads for per-OD work (estimation, validation).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the traveler's problem for one OD and write link flows.
    Solve(commands::SolveArgs),
    /// Estimate model parameters from observed trips.
    Estimate(commands::EstimateArgs),
    /// Sample synthetic trips from a solved model.
    Simulate(commands::SimulateArgs),
    /// Compare model predictions against observed trips.
    Validate(commands::ValidateArgs),
    /// Trim trips to compact origin/destination node sets.
    Trim(commands::TrimArgs),
    /// Screen out trips with too much utility outside the active set.
    Filter(commands::FilterArgs),
    /// Enumerated-route MNL/PSL baselines on small networks.
    Baseline(commands::BaselineArgs),
    /// Solve across a grid of parameter values.
    Sweep(commands::SweepArgs),
}

fn main() {
    let cli = Cli::parse();
    let jobs = cli.jobs.max(1);
    let result = match cli.command {
        Command::Solve(args) => commands::run_solve(args, jobs),
        Command::Estimate(args) => commands::run_estimate(args, jobs),
        Command::Simulate(args) => commands::run_simulate(args, jobs),
        Command::Validate(args) => commands::run_validate(args, jobs),
        Command::Trim(args) => commands::run_trim(args, jobs),
        Command::Filter(args) => commands::run_filter(args, jobs),
        Command::Baseline(args) => commands::run_baseline(args, jobs),
        Command::Sweep(args) => commands::run_sweep(args, jobs),
    };
    if let Err(err) = result {
        let (exit_code, kind) = classify(&err);
        let payload = serde_json::json!({
            "error": {
                "kind": kind,
                "exit_code": exit_code,
                "message": err.to_string(),
            }
        });
        eprintln!("{payload}");
        std::process::exit(exit_code);
    }
}

/// Exit code 3 for data/configuration problems, 4 for numerical failures.
fn classify(err: &CoreError) -> (i32, &'static str) {
    match err {
        CoreError::NonConvergence { .. }
        | CoreError::DecompositionResidual { .. }
        | CoreError::DeadEnd { .. }
        | CoreError::StepCapExceeded { .. }
        | CoreError::RankDeficient { .. }
        | CoreError::SearchFailed(_)
        | CoreError::NegativeFlow(_) => (4, "numerical"),
        _ => (3, "data"),
    }
}
