use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::Subcommand;
use gridsleuth_core::metering::{feeder_discrepancy, simulate_interval};
use gridsleuth_core::SwitchVector;

use crate::{load_scenario, load_topology, resolve_seed};

#[derive(Subcommand)]
pub enum SimCmd {
    /// Simulate intervals and write one CSV row per meter reading.
    Run {
        topology: PathBuf,
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        intervals: u64,
        /// Switch states; the scenario's (or the normal state) by default.
        #[arg(long)]
        vr: Option<SwitchVector>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cmd: SimCmd) -> anyhow::Result<()> {
    let SimCmd::Run {
        topology,
        scenario,
        intervals,
        vr,
        seed,
        out,
    } = cmd;
    let t = load_topology(&topology)?;
    let sc = load_scenario(&scenario)?;
    let seed = resolve_seed(seed, &sc)?;
    let meters = sc.meters(&t)?;
    let v = match vr {
        Some(v) => {
            t.check_switches(&v)?;
            v
        }
        None => sc.initial_switches(&t)?,
    };

    let sink: Box<dyn Write> = match &out {
        Some(p) => {
            Box::new(std::fs::File::create(p).with_context(|| format!("writing {}", p.display()))?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for k in 0..intervals {
        let interval = simulate_interval(&t, &v, &meters, &sc.config(), seed, k)?;
        for row in interval.rows() {
            w.serialize(row)?;
        }
        for f in &interval.frtus {
            let ratio = feeder_discrepancy(&interval, &f.name).unwrap_or(f64::INFINITY);
            let flag = if ratio > sc.threshold { "ALARM" } else { "ok" };
            eprintln!(
                "interval {k} {}: aggregate {:.3} kWh, discrepancy {ratio:.4} {flag}",
                f.name, f.aggregate_kwh
            );
        }
    }
    w.flush()?;
    Ok(())
}
