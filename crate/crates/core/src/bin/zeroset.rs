//! Command-line front end: `run`, `validate`, `catalog`, `replay`.
//!
//! Exit codes: 0 when every bound check is satisfied or vacuous, 2 when some
//! bound is unsatisfied, 1 on any error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zeroset::coefficients::catalog;
use zeroset::scenario::{parse_scenario, replay, run_with, RunOptions, ScenarioConfig};
use zeroset::Result;

#[derive(Parser)]
#[command(name = "zeroset", version, about = "Monte Carlo checks of zero-set inaccessibility for Lipschitz SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json plus table_*.csv.
    Run {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also dump the first paths as CSV under <out>/paths.
        #[arg(long)]
        debug_paths: bool,
    },
    /// Parse and validate a scenario, printing it with defaults filled in.
    Validate { config: PathBuf },
    /// List the built-in coefficient fields.
    Catalog,
    /// Re-simulate a single path of a scenario and print it as CSV.
    Replay {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        path: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|source| zeroset::Error::Io {
        path: path.clone(),
        source,
    })?;
    parse_scenario(&text)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            workers,
            out,
            debug_paths,
        } => {
            let cfg = load(&config)?;
            let report = run_with(
                &cfg,
                &RunOptions {
                    out_dir: Some(out),
                    workers,
                    debug_paths,
                },
            )?;
            for p in &report.outputs {
                println!("wrote {}", p.display());
            }
            if report.all_satisfied() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("some bound checks are unsatisfied");
                Ok(ExitCode::from(2))
            }
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Catalog => {
            for entry in catalog() {
                let k = entry.field.lipschitz().map_or("none".to_string(), |b| format!("{} ({:?})", b.value, b.source));
                println!("{}", entry.name);
                println!("  defaults: {}", serde_json::to_string(&entry.spec)?);
                println!("  d = {}, m = {}, K = {k}", entry.field.d(), entry.field.m());
                println!("  {}", entry.analytic_notes);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { config, seed, path, out } => {
            let cfg = load(&config)?;
            let p = replay(&cfg, seed.unwrap_or(cfg.master_seed), path)?;
            match out {
                Some(file) => p.write_csv(fs::File::create(&file).map_err(|source| zeroset::Error::Io { path: file.clone(), source })?)?,
                None => p.write_csv(std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
