//! Command-line front end: `simulate`, `bench`, `classify` and `inspect`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use selfheal::exchange::ShareMode;
use selfheal::harness::{
    bench, classify_offline, decision_line, inspect, simulate, HarnessError, SimConfig,
};

#[derive(Parser)]
#[command(version, about = "Deterministic self-healing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured share mode.
    #[arg(long)]
    mode: Option<ShareMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and persist stores, logs and a summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the metric table; written to a file with --out.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a fault record against a saved fault-model database.
    Classify {
        #[arg(long)]
        models: PathBuf,
        /// File whose first line is the failing ST record.
        #[arg(long)]
        fault: PathBuf,
    },
    /// Dump a saved store in readable form.
    Inspect { path: PathBuf },
}

fn load(common: &Common) -> Result<SimConfig, HarnessError> {
    let mut config = match &common.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.cluster.seed = seed;
    }
    if let Some(mode) = common.mode {
        config.cluster.mode = mode;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate { common, out } => {
            let summary = simulate(&load(&common)?, &out)?;
            print!("{}", summary.to_text());
        }
        Command::Bench { common, out } => {
            let table = bench(&load(&common)?)?.to_text();
            match out {
                Some(path) => std::fs::write(&path, table)
                    .map_err(|source| HarnessError::Io { path, source })?,
                None => print!("{table}"),
            }
        }
        Command::Classify { models, fault } => {
            let c = classify_offline(&models, &fault)?;
            println!("{}", decision_line(&c.decision));
        }
        Command::Inspect { path } => print!("{}", inspect(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing::Level::WARN)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
