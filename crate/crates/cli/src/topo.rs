use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Subcommand;
use gridsleuth_core::energization::energize;
use gridsleuth_core::matrix::{adjacency_from_incidence, BinaryMatrix};
use gridsleuth_core::topology::validate_operating_state;
use gridsleuth_core::{SourceVector, SwitchVector, Topology};

use crate::{ensure_dir, load_topology, Exit};

#[derive(Subcommand)]
pub enum TopoCmd {
    /// Check structural invariants and, with --vr, an operating state.
    Validate {
        topology: PathBuf,
        /// Switch states as a bit string, e.g. 1110111.
        #[arg(long)]
        vr: Option<SwitchVector>,
    },
    /// Write incidence and adjacency matrices as dense and sparse CSV.
    Matrices {
        topology: PathBuf,
        /// Switch states for the adjacency matrix; all closed by default.
        #[arg(long)]
        vr: Option<SwitchVector>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the energized-node vector for a switch state.
    Energize {
        topology: PathBuf,
        #[arg(long)]
        vr: SwitchVector,
        /// Source vector; the topology's substations by default.
        #[arg(long)]
        sources: Option<SourceVector>,
    },
}

pub fn run(cmd: TopoCmd) -> anyhow::Result<()> {
    match cmd {
        TopoCmd::Validate { topology, vr } => validate(&topology, vr),
        TopoCmd::Matrices { topology, vr, out } => matrices(&topology, vr, &out),
        TopoCmd::Energize {
            topology,
            vr,
            sources,
        } => {
            let t = load_topology(&topology)?;
            t.check_switches(&vr)?;
            let s = sources.unwrap_or_else(|| t.source_vector());
            let fp = energize(&t.incidence_matrix(), &vr, &s)?;
            println!("{}", fp.energized);
            Ok(())
        }
    }
}

fn validate(path: &Path, vr: Option<SwitchVector>) -> anyhow::Result<()> {
    let t = load_topology(path)?;
    println!(
        "ok: {} nodes, {} edges, {} feeders, normal state {}",
        t.node_count(),
        t.edge_count(),
        t.breakers().count(),
        t.normal_switches()
    );
    let Some(v) = vr else {
        return Ok(());
    };
    t.check_switches(&v)?;
    let st = validate_operating_state(&t, &v, false)?;
    if st.is_valid() {
        println!("state {v}: radial, all loads served");
        return Ok(());
    }
    for line in st.violations() {
        println!("state {v}: {line}");
    }
    Err(Exit {
        code: 2,
        message: format!("state {v} violates operating constraints"),
    }
    .into())
}

fn node_labels(t: &Topology) -> Vec<String> {
    t.nodes().iter().map(|n| n.label.clone()).collect()
}

fn write_dense(
    path: &Path,
    corner: &str,
    cols: &[String],
    rows: &[String],
    m: &BinaryMatrix,
) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec![corner.to_string()];
    header.extend(cols.iter().cloned());
    w.write_record(&header)?;
    for (i, label) in rows.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_sparse(path: &Path, m: &BinaryMatrix) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["row", "col", "value"])?;
    for (r, c) in m.nonzeros() {
        w.write_record([
            (r + 1).to_string(),
            (c + 1).to_string(),
            m.get(r, c).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn matrices(path: &Path, vr: Option<SwitchVector>, out: &PathBuf) -> anyhow::Result<()> {
    let t = load_topology(path)?;
    let v = vr.unwrap_or_else(|| SwitchVector::ones(t.edge_count()));
    t.check_switches(&v)?;
    let incidence = t.incidence_matrix();
    let adjacency = adjacency_from_incidence(&incidence, &v)?;
    ensure_dir(out)?;

    let nodes = node_labels(&t);
    let edges: Vec<String> = t.edges().iter().map(|e| e.label.clone()).collect();
    write_dense(
        &out.join("incidence.csv"),
        "node",
        &edges,
        &nodes,
        incidence.matrix(),
    )?;
    write_dense(
        &out.join("adjacency.csv"),
        "node",
        &nodes,
        &nodes,
        adjacency.matrix(),
    )?;
    write_sparse(&out.join("incidence_sparse.csv"), incidence.matrix())?;
    write_sparse(&out.join("adjacency_sparse.csv"), adjacency.matrix())?;

    let (mi, ma) = (incidence.matrix(), adjacency.matrix());
    println!("incidence {}x{} sum {}", mi.rows(), mi.cols(), mi.total());
    println!(
        "adjacency {}x{} sum {} (V_r {v})",
        ma.rows(),
        ma.cols(),
        ma.total()
    );
    Ok(())
}
