//! Command-line front end for the crossbar switch simulator.
//!
//! `run` executes a JSON config and writes CSV results, `sweep` does the
//! same but insists the config contains a sweep block, and `verify`
//! runs a built-in cross-validation suite.
//!
//! Exit codes: 0 on success, 1 for configuration or runtime errors,
//! 2 when a verification suite reports a failing check.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use switchsim::config::Config;
use switchsim::driver::{expand, run_config};
use switchsim::report::write_csv;
use switchsim::verify;

/// Environment variable supplying the default worker thread count.
const THREADS_ENV: &str = "SWITCHSIM_THREADS";

#[derive(Parser)]
#[command(name = "switchsim", version, about = "Input-queued crossbar switch simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulations described by a JSON config file.
    Run {
        /// Path to the JSON config.
        config: PathBuf,
        /// Write CSV results here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for replications; defaults to SWITCHSIM_THREADS
        /// or 1.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a config whose sweep block varies one axis.
    Sweep {
        /// Path to the JSON config; must contain a sweep block.
        config: PathBuf,
        /// Write CSV results here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for replications; defaults to SWITCHSIM_THREADS
        /// or 1.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a built-in verification suite: matching, projection,
    /// expected_weight, single_queue, weight_bound, or all.
    Verify {
        /// Suite name.
        suite: String,
    },
}

fn thread_count(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1)
}

fn load_config(path: &PathBuf) -> Result<Config, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Config::from_json(&text).map_err(|e| e.to_string())
}

fn execute(config: &Config, out: Option<&PathBuf>, threads: usize) -> Result<(), String> {
    for unit in expand(config).map_err(|e| e.to_string())? {
        for warning in unit.traffic.warnings() {
            eprintln!("warning: {warning}");
        }
    }
    let rows = run_config(config, threads).map_err(|e| e.to_string())?;
    match out {
        Some(path) => {
            let mut file = fs::File::create(path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            write_csv(&mut file, &rows).map_err(|e| e.to_string())?;
            file.flush().map_err(|e| e.to_string())
        }
        None => {
            let stdout = std::io::stdout();
            write_csv(&mut stdout.lock(), &rows).map_err(|e| e.to_string())
        }
    }
}

fn run_verify(suite: &str) -> Result<ExitCode, String> {
    let reports = verify::run_suite(suite).map_err(|e| e.to_string())?;
    let mut failed = 0usize;
    for r in &reports {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} ({})", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed}/{} checks failed", reports.len());
        Ok(ExitCode::from(2))
    } else {
        println!("all {} checks passed", reports.len());
        Ok(ExitCode::SUCCESS)
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run { config, out, threads } => {
            let config = load_config(&config)?;
            execute(&config, out.as_ref(), thread_count(threads))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, out, threads } => {
            let config = load_config(&config)?;
            if config.sweep.is_none() {
                return Err("sweep requires a config with a sweep block".to_string());
            }
            execute(&config, out.as_ref(), thread_count(threads))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => run_verify(&suite),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
