//! `divcol` batch driver.

mod config;
mod run;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::parse_config;
use crate::run::Outcome;

/// Environment variable holding the number of concurrent study workers.
const WORKERS_ENV: &str = "DIVCOL_WORKERS";

#[derive(Parser)]
#[command(name = "divcol", version, about = "Divergence-conforming isogeometric collocation flow solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case or study and write report.json, profiles.csv and field_samples.csv.
    Run {
        /// Flat `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one key, e.g. `--set mesh=32`; may be repeated.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn workers() -> Result<usize, String> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => v.trim().parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| format!("{WORKERS_ENV} must be a positive integer, got '{v}'")),
    }
}

fn write_outputs(dir: &Path, out: &Outcome) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let file = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(file, &out.report)?;
    let mut w = csv::Writer::from_path(dir.join("profiles.csv"))?;
    for r in &out.profiles {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("field_samples.csv"))?;
    for r in &out.fields {
        w.serialize(r)?;
    }
    w.flush()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    let Command::Run { config, set } = cli.command;
    let cfg = match parse_config(config.as_deref(), &set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let workers = match workers() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match run::run(&cfg, workers) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: solver failed: {e}");
            return ExitCode::from(3);
        }
    };
    if let Err(e) = write_outputs(&cfg.output, &outcome) {
        eprintln!("error: cannot write results to {}: {e}", cfg.output.display());
        return ExitCode::FAILURE;
    }
    eprintln!("wrote {}", cfg.output.display());
    ExitCode::SUCCESS
}
