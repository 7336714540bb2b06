use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kahlerfol::cli::{curvature_summary, format_table, list_builders, report_json, run_scenario, RunOptions, Scenario};

#[derive(Parser)]
#[command(name = "kahlerfol", version, about = "Numerical checks for Kaehler metrics with homothetic foliations, their twists and almost-Kaehler products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the scenario and run its checks; exit 1 if any check fails.
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Replace every upper-bound tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the curvature of the scenario's metric at a point.
    Curvature {
        scenario: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// List the builders, their parameters and checks.
    ListBuilders,
}

fn parse_point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|c| c.trim().parse::<f64>().map_err(|e| format!("bad coordinate {c:?}: {e}"))).collect()
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify { scenario, seed, samples, tol, out } => {
            if samples == Some(0) {
                return usage_error("--samples must be positive");
            }
            let s = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            let report = match run_scenario(&s, RunOptions { seed, samples, tol }) {
                Ok(r) => r,
                Err(e) => return usage_error(e),
            };
            print!("{}", format_table(&report));
            if let Some(path) = out {
                if let Err(e) = std::fs::write(&path, report_json(&report) + "\n") {
                    return usage_error(format!("cannot write {}: {e}", path.display()));
                }
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Curvature { scenario, point } => {
            let p = match parse_point(&point) {
                Ok(p) => p,
                Err(e) => return usage_error(e),
            };
            let s = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => return usage_error(e),
            };
            match curvature_summary(&s, &p) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => usage_error(e),
            }
        }
        Command::ListBuilders => {
            print!("{}", list_builders());
            ExitCode::SUCCESS
        }
    }
}
