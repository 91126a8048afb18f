use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use gridsleuth_core::analytics::{score_history, DEFAULT_DEVIATION};
use gridsleuth_core::metering::IntervalRow;
use gridsleuth_core::NodeId;

use crate::Exit;

#[derive(Args)]
pub struct ScoreArgs {
    /// Interval CSV as written by `sim run`.
    #[arg(long)]
    history: PathBuf,
    /// Localized node (1-based position in the topology file).
    #[arg(long)]
    node: usize,
    /// Intervals before this index form the reference profile; half the
    /// history by default.
    #[arg(long)]
    baseline: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_DEVIATION)]
    deviation: f64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: ScoreArgs) -> anyhow::Result<()> {
    if args.node == 0 {
        return Err(Exit {
            code: 1,
            message: "--node is 1-based".into(),
        }
        .into());
    }
    let mut reader = csv::Reader::from_path(&args.history)
        .with_context(|| format!("reading {}", args.history.display()))?;
    let rows: Vec<IntervalRow> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("malformed history {}", args.history.display()))?;
    let baseline = args
        .baseline
        .unwrap_or_else(|| rows.iter().map(|r| r.interval + 1).max().unwrap_or(0) / 2);
    let ranked = score_history(&rows, NodeId::new(args.node), baseline, args.deviation)?;

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => {
            Box::new(std::fs::File::create(p).with_context(|| format!("writing {}", p.display()))?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["meter_id", "node", "s_a", "p_a", "index", "rank"])?;
    for r in ranked {
        w.write_record([
            r.meter_id,
            r.node.to_string(),
            format!("{:.6}", r.s_a),
            format!("{:.6}", r.p_a),
            format!("{:.6}", r.index),
            r.rank.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
