//! The `volterra` command line: argument parsing and dispatch. Exit codes are
//! 0 (success, all checks pass), 1 (a check failed), 2 (invalid input) and
//! 3 (numerical failure).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::Result;
use crate::flows::{conservation_report, integrate, ConservationReport, StepControl};
use crate::lattice::{PeriodicOperator, ToleranceConfig};
use crate::verify::{expansion_report, invariants_report, run_suite, spectrum_report, Suite, Tolerances};

#[derive(Debug, Parser)]
#[command(name = "volterra", version, about = "Spectral theory and brackets of the periodic Volterra lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random operator with weights uniform in [lo, hi).
    Gen {
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        lo: f64,
        #[arg(long, default_value_t = 2.0)]
        hi: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coefficients of Δ, branch points, Dirichlet spectrum and divisor.
    Spectrum {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// The integrals J_k by both routes and the expansions at infinity.
    Invariants {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run a property suite and print one JSON record per check.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Integrate the k-th flow, write the trajectory as CSV and print the drift table.
    Evolve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        flow: usize,
        #[arg(long = "t-end")]
        t_end: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coefficient tables of ln Δ and ln ρ at infinity.
    Expand {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        order: usize,
    },
}

#[derive(Debug, Serialize)]
struct EvolveSummary {
    out: PathBuf,
    t_end: f64,
    final_state: Vec<f64>,
    error_estimate: f64,
    drift: ConservationReport,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code. Errors go to `err` as a single `Kind: message` line.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let reason = e.to_string();
            let first = reason.lines().next().unwrap_or("").trim_start_matches("error: ");
            let _ = writeln!(err, "InvalidInput: {first}");
            return 2;
        }
        Err(e) => {
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn print_json<S: Serialize>(out: &mut dyn Write, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    let tol = ToleranceConfig::default();
    match command {
        Command::Gen { n, seed, lo, hi, out: path } => {
            let op = PeriodicOperator::random(n, seed, lo, hi)?;
            std::fs::write(path, op.to_json() + "\n")?;
        }
        Command::Spectrum { input } => {
            let op = PeriodicOperator::read_json(input)?;
            print_json(out, &spectrum_report(&op, &tol)?)?;
        }
        Command::Invariants { input } => {
            let op = PeriodicOperator::read_json(input)?;
            print_json(out, &invariants_report(&op, &tol)?)?;
        }
        Command::Verify { input, suite, tol: tau } => {
            let suite: Suite = suite.parse()?;
            let tols = Tolerances::from_identity_tolerance(tau)?;
            let op = PeriodicOperator::read_json(input)?;
            let checks = run_suite(&op, suite, &tols)?;
            print_json(out, &checks)?;
            if checks.iter().any(|c| !c.pass) {
                return Ok(1);
            }
        }
        Command::Evolve { input, flow, t_end, out: path } => {
            let op = PeriodicOperator::read_json(input)?;
            let traj = integrate(&op, flow, t_end, &StepControl::default())?;
            std::fs::write(&path, traj.to_csv())?;
            let drift = conservation_report(&traj, &op)?;
            let summary = EvolveSummary {
                out: path,
                t_end,
                final_state: traj.end().to_vec(),
                error_estimate: traj.error_estimate,
                drift,
            };
            print_json(out, &summary)?;
        }
        Command::Expand { input, order } => {
            let op = PeriodicOperator::read_json(input)?;
            print_json(out, &expansion_report(&op, order, &tol)?)?;
        }
    }
    Ok(0)
}
