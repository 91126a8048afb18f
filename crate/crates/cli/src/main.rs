//! `gridsleuth` command-line driver.

mod localize;
mod score;
mod sim;
mod topo;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gridsleuth_core::metering::Scenario;
use gridsleuth_core::{Error, Topology};

#[derive(Parser)]
#[command(
    name = "gridsleuth",
    version,
    about = "Locate tampered smart meters on radial feeders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a topology file.
    #[command(subcommand)]
    Topo(topo::TopoCmd),
    /// Simulate metering intervals.
    #[command(subcommand)]
    Sim(sim::SimCmd),
    /// Run a localization episode.
    #[command(subcommand)]
    Localize(localize::LocalizeCmd),
    /// Rank the meters of one node from an interval history.
    Score(score::ScoreArgs),
}

/// Failure carrying its own exit status.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(exit) = err.downcast_ref::<Exit>() {
        return exit.code;
    }
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_invariant_violation() => 2,
        Some(Error::InfeasiblePlan(_)) => 3,
        Some(Error::OracleInconsistent(_)) => 4,
        _ => 1,
    }
}

pub fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_topology(path: &Path) -> anyhow::Result<Topology> {
    let text = read_text(path)?;
    Topology::from_json(&text)
        .map_err(|e| anyhow::Error::new(e).context(format!("topology {}", path.display())))
}

pub fn load_scenario(path: &Path) -> anyhow::Result<Scenario> {
    let text = read_text(path)?;
    Scenario::from_json(&text)
        .map_err(|e| anyhow::Error::new(e).context(format!("scenario {}", path.display())))
}

/// Seed precedence: command-line flag, then `GRIDSLEUTH_SEED`, then file.
pub fn resolve_seed(flag: Option<u64>, scenario: &Scenario) -> anyhow::Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("GRIDSLEUTH_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("GRIDSLEUTH_SEED={v:?} is not a u64")),
        Err(_) => Ok(scenario.seed),
    }
}

pub fn ensure_dir(dir: &PathBuf) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Topo(cmd) => topo::run(cmd),
        Command::Sim(cmd) => sim::run(cmd),
        Command::Localize(cmd) => localize::run(cmd),
        Command::Score(args) => score::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
