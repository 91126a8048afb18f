//! Reference networks.

use crate::topology::{
    build_topology, EdgeKindSpec, EdgeSpec, Label, NodeKindSpec, NodeSpec, Topology, TopologySpec,
};

/// Two-feeder, six-load test network ("CT-8").
///
/// ```text
///  [1]=e1=(2)-e2-(3)-e3-(4)
///                 :
///                 e4 (tie, normally open)
///                 :
///                (5)-e5-(6*)-e6-(7)=e7=[8]
/// ```
///
/// Nodes 1 and 8 are the substation sources behind breakers e1 (`FRTU_1`)
/// and e7 (`FRTU_2`); node 6 carries a distributed generator.
pub fn ct8_spec() -> TopologySpec {
    let nodes = (1..=8)
        .map(|i| NodeSpec {
            id: Label::Num(i),
            kind: if i == 1 || i == 8 {
                NodeKindSpec::Source
            } else {
                NodeKindSpec::Load
            },
            dg: i == 6,
        })
        .collect();
    let wiring = [
        (EdgeKindSpec::Breaker, 1, 2, Some("FRTU_1")),
        (EdgeKindSpec::Sectionalizer, 2, 3, None),
        (EdgeKindSpec::Sectionalizer, 3, 4, None),
        (EdgeKindSpec::Tie, 3, 5, None),
        (EdgeKindSpec::Sectionalizer, 5, 6, None),
        (EdgeKindSpec::Sectionalizer, 6, 7, None),
        (EdgeKindSpec::Breaker, 7, 8, Some("FRTU_2")),
    ];
    let edges = wiring
        .iter()
        .enumerate()
        .map(|(j, &(kind, from, to, frtu))| EdgeSpec {
            id: Label::Text(format!("e{}", j + 1)),
            kind,
            from: Label::Num(from),
            to: Label::Num(to),
            frtu: frtu.map(str::to_string),
        })
        .collect();
    TopologySpec { nodes, edges }
}

pub fn ct8() -> Topology {
    build_topology(&ct8_spec()).expect("CT-8 is a valid radial network")
}
