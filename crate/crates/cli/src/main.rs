use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skewprod_cli::config::load_config;
use skewprod_cli::run::Status;
use skewprod_cli::{presets, run_config, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "skewprod", version, about = "Limit-theorem experiments for random skew products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file (TOML, or JSON by extension) or a bundled preset.
    Run {
        /// Path to a config, or the name of a preset.
        config: String,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: the config's `output`, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Treat warnings as acceptance failures.
        #[arg(long)]
        strict: bool,
    },
    /// List bundled presets and the criteria they cover.
    Presets {
        /// Print the TOML of one preset instead.
        #[arg(long)]
        show: Option<String>,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Presets { show: None } => {
            print!("{}", presets::catalog());
            Ok(0)
        }
        Command::Presets { show: Some(name) } => match presets::find(&name) {
            Some(p) => {
                print!("{}", p.toml);
                Ok(0)
            }
            None => Err(CliError::Config { path: "presets".into(), msg: format!("no preset named {name:?}") }),
        },
        Command::Run { config, seed, workers, out, strict } => {
            let path = PathBuf::from(&config);
            let cfg = match presets::find(&config) {
                Some(p) if !path.exists() => p.config()?,
                _ => load_config(&path)?,
            };
            let summary = run_config(cfg, &RunOptions { seed, workers, out, strict })?;
            for e in &summary.record.experiments {
                let tag = match e.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::Info => "INFO",
                };
                println!("{tag} {} ({}, {})", e.name, e.kind, e.outcome);
                for c in &e.checks {
                    println!("     {} {}: {:.4e} {} {:e}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.value, c.relation, c.threshold);
                }
                for w in &e.warnings {
                    println!("     warning: {w}");
                }
            }
            println!("results in {}", summary.out.display());
            Ok(summary.exit_code)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
