//! Batch experiment runner. `run` executes a JSON-configured experiment and
//! writes CSV artifacts plus a hashed manifest; `diff` numerically compares
//! two run directories.
//!
//! Exit codes for `run`: 0 success, 1 configuration error, 2 solver failure
//! in a requested functional. For `diff`: 0 all files match, 1 otherwise.

use clap::{Parser, Subcommand};
use l1rom::experiment::{
    diff_against_reference, run_experiment, DiffTolerances, ExperimentConfig, ExperimentError,
    FunctionalChoice,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "l1rom", version, about = "Dictionary-based model reduction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated functionals: l2,l1lp,l1irls,huber,galerkin.
        #[arg(long)]
        functionals: Option<String>,
        /// Shrink grids for quick desk-scale runs.
        #[arg(long)]
        desk_scale: bool,
    },
    /// Compare the CSVs of a run directory against a reference directory.
    Diff {
        run: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        abs_tol: f64,
        #[arg(long, default_value_t = 1e-9)]
        rel_tol: f64,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            functionals,
            desk_scale,
        } => run(config, out, seed, functionals, desk_scale),
        Command::Diff {
            run,
            reference,
            abs_tol,
            rel_tol,
        } => diff(run, reference, abs_tol, rel_tol),
    }
}

fn run(
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    functionals: Option<String>,
    desk_scale: bool,
) -> ExitCode {
    let mut cfg = match ExperimentConfig::from_file(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(dir) = out {
        cfg.out_dir = Some(dir);
    }
    if let Some(s) = seed {
        cfg.seed = Some(s);
    }
    if let Some(list) = functionals {
        let parsed: Result<Vec<FunctionalChoice>, String> =
            list.split(',').map(str::parse).collect();
        match parsed {
            Ok(fs) => cfg.functionals = Some(fs),
            Err(e) => {
                eprintln!("invalid --functionals: {e}");
                return ExitCode::from(1);
            }
        }
    }
    let mut resolved = match cfg.resolve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    if desk_scale {
        resolved.desk_scale();
    }
    match run_experiment(&resolved) {
        Ok(summary) => {
            for (label, status) in &summary.statuses {
                println!("{label}: {status}");
            }
            println!(
                "wrote {} file(s) to {}",
                summary.files.len(),
                summary.out_dir.display()
            );
            if summary.has_solver_failure() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ ExperimentError::ConfigInvalid(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

fn diff(run_dir: PathBuf, reference: PathBuf, abs_tol: f64, rel_tol: f64) -> ExitCode {
    let tol = DiffTolerances {
        abs: abs_tol,
        rel: rel_tol,
    };
    match diff_against_reference(&run_dir, &reference, tol) {
        Ok(report) => {
            if report.passed() {
                println!("{} file(s) match", report.files_compared);
                ExitCode::SUCCESS
            } else {
                for f in &report.failures {
                    eprintln!("{f}");
                }
                eprintln!(
                    "{} difference(s) across {} file(s)",
                    report.failures.len(),
                    report.files_compared
                );
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
