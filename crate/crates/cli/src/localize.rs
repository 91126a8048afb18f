use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Subcommand;
use gridsleuth_core::metering::{frtu_alarms, simulate_interval};
use gridsleuth_core::planner::{localize, LocalizationReport, MeteringOracle};
use gridsleuth_core::NodeId;

use crate::{ensure_dir, load_scenario, load_topology, resolve_seed, Exit};

#[derive(Subcommand)]
pub enum LocalizeCmd {
    /// Localize tampering from the first alarming FRTU in the scenario.
    Run {
        topology: PathBuf,
        scenario: PathBuf,
        /// Compare the verdict with the scenario's ground truth.
        #[arg(long)]
        check: bool,
        /// Directory for report.json and steps.log.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Interval index simulated for every FRTU reading.
        #[arg(long, default_value_t = 0)]
        interval: u64,
    },
}

fn write_report(dir: &Path, report: &LocalizationReport) -> anyhow::Result<()> {
    ensure_dir(&dir.to_path_buf())?;
    let json = serde_json::to_string_pretty(report)? + "\n";
    let path = dir.join("report.json");
    std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
    let path = dir.join("steps.log");
    std::fs::write(&path, report.step_log())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn fmt_nodes(nodes: &[NodeId]) -> String {
    let parts: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn run(cmd: LocalizeCmd) -> anyhow::Result<()> {
    let LocalizeCmd::Run {
        topology,
        scenario,
        check,
        out,
        seed,
        interval,
    } = cmd;
    let t = load_topology(&topology)?;
    let sc = load_scenario(&scenario)?;
    let seed = resolve_seed(seed, &sc)?;
    let meters = sc.meters(&t)?;
    let v0 = sc.initial_switches(&t)?;

    let first = simulate_interval(&t, &v0, &meters, &sc.config(), seed, interval)?;
    let alarms = frtu_alarms(&first, sc.threshold)?;
    let trigger = alarms.iter().find(|(_, &a)| a).map(|(&b, _)| b);

    let report = match trigger {
        None => LocalizationReport::quiet(v0),
        Some(trigger) => {
            let mut oracle = MeteringOracle {
                topology: &t,
                meters,
                config: sc.config(),
                seed,
                interval,
                threshold: sc.threshold,
            };
            localize(
                &t,
                &v0,
                &t.source_vector(),
                &t.dg_vector(),
                trigger,
                &mut oracle,
            )?
        }
    };
    write_report(&out, &report)?;
    print!("{}", report.step_log());

    if check {
        let expected = sc.tampered_nodes(&t)?;
        if report.final_suspects != expected {
            return Err(Exit {
                code: 5,
                message: format!(
                    "check failed: found {}, expected {}",
                    fmt_nodes(&report.final_suspects),
                    fmt_nodes(&expected)
                ),
            }
            .into());
        }
        println!("check passed");
    }
    Ok(())
}
