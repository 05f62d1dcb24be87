//! `halfline`: config-driven batch runs of the verification suites.
//!
//! Exit codes: 0 ok, 2 config or input error, 3 a numerical check failed,
//! 4 a solver failed.

// negated comparisons are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use commands::{Failure, Flags, Report};
use config::{Format, RunConfig};

#[derive(Parser)]
#[command(name = "halfline", version, about = "Weyl functions and realizations of -d^2/dx^2 + T on the half-line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    /// Grid size: t-grid points, interval cells or half-line cells, by command.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Evaluate M(z) or M_B(z) at the configured points.
    WeylEval,
    /// Multiplicity table over the t-grid.
    Multiplicity,
    /// Interval eigenvalues: oracle against k^2 + t_j.
    SpectrumInterval,
    /// Krein-formula resolvent against the finite-difference oracle.
    ResolventCheck,
    /// Regularized direct sum of spectral blocks.
    TripletSum,
    /// Discretized 1-D Schrödinger potential as T.
    SchrodingerDemo,
    /// Run the acceptance suite.
    VerifyAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK: u8 = 3;
const EXIT_SOLVER: u8 = 4;

fn fail(code: u8, kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn render(report: &Report, format: Format) -> Result<Vec<u8>, String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.json).map_err(|e| e.to_string())?;
            s.push('\n');
            Ok(s.into_bytes())
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&report.header).map_err(|e| e.to_string())?;
            for r in &report.rows {
                w.write_record(r).map_err(|e| e.to_string())?;
            }
            w.into_inner().map_err(|e| e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => Some(c),
            Err(e) => return fail(EXIT_CONFIG, "config_parse", e.0),
        },
        None => None,
    };
    let flags = Flags { seed: cli.seed, rank_tol: cli.rank_tol, grid_n: cli.grid_n };
    let result = match (cli.command, &cfg) {
        (Command::VerifyAll, cfg) => Ok(commands::verify_all(cfg.as_ref(), &flags)),
        (_, None) => return fail(EXIT_CONFIG, "config_parse", "--config is required for this command".into()),
        (Command::WeylEval, Some(c)) => commands::weyl_eval(c),
        (Command::Multiplicity, Some(c)) => commands::multiplicity(c, &flags),
        (Command::SpectrumInterval, Some(c)) => commands::spectrum_interval(c, &flags),
        (Command::ResolventCheck, Some(c)) => commands::resolvent_check(c, &flags),
        (Command::TripletSum, Some(c)) => commands::triplet_sum(c),
        (Command::SchrodingerDemo, Some(c)) => commands::schrodinger_demo(c, &flags),
    };
    let report = match result {
        Ok(r) => r,
        Err(Failure::Config(msg)) => return fail(EXIT_CONFIG, "config_parse", msg),
        Err(Failure::Numerical(e)) => {
            let code = if e.is_solver_failure() { EXIT_SOLVER } else { EXIT_CONFIG };
            return fail(code, e.code(), e.to_string());
        }
    };
    let format = match cli.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => cfg.as_ref().and_then(|c| c.output.format).unwrap_or(Format::Json),
    };
    let bytes = match render(&report, format) {
        Ok(b) => b,
        Err(e) => return fail(EXIT_CONFIG, "output", e),
    };
    let out = cli.out.clone().or_else(|| cfg.as_ref().and_then(|c| c.output.path.clone()));
    let written = match out {
        Some(path) => std::fs::write(&path, &bytes).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(&bytes).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        return fail(EXIT_CONFIG, "output", e);
    }
    if report.failed_checks > 0 {
        ExitCode::from(EXIT_CHECK)
    } else {
        ExitCode::SUCCESS
    }
}
