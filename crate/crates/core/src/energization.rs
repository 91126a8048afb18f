//! Energized-node computation by fixed-point iteration over the switched
//! adjacency matrix.
//!
//! Starting from the source vector, each round propagates power one hop:
//! `next = binarize(prev · M_a + prev)`. The iterate only ever gains ones,
//! so it stops changing after at most `|V|` rounds. Binarizing every round
//! (rather than once at the end) keeps the entries in `{0, 1}`; the walk
//! counts of the unclamped product would otherwise grow geometrically
//! without changing which entries are nonzero.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matrix::{adjacency_from_incidence, AdjacencyMatrix, IncidenceMatrix};
use crate::topology::{EdgeId, NodeId, Topology};
use crate::vectors::{EnergizationVector, SourceVector, SwitchVector};

/// Converged energization plus the number of propagation rounds it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPoint {
    pub energized: EnergizationVector,
    pub iterations: usize,
}

/// Iterate `V_f ← V̂_f · M_a + V̂_f` from `V_f = V_s` until it stops changing.
pub fn propagate(adjacency: &AdjacencyMatrix, sources: &SourceVector) -> Result<FixedPoint> {
    let n = adjacency.node_count();
    if sources.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: sources.len(),
        });
    }
    let m = adjacency.matrix();

    let mut current: Vec<u8> = sources.bits().iter().map(|&b| u8::from(b)).collect();
    let mut previous = vec![0u8; n];
    let mut iterations = 0;
    while current != previous {
        previous.clone_from(&current);
        let mut next = vec![0u32; n];
        for (i, &vi) in previous.iter().enumerate() {
            if vi == 0 {
                continue;
            }
            for (j, &a) in m.row(i).iter().enumerate() {
                next[j] += u32::from(vi) * u32::from(a);
            }
        }
        for (j, v) in next.iter_mut().enumerate() {
            *v += u32::from(previous[j]);
        }
        current = next.into_iter().map(|v| u8::from(v != 0)).collect();
        iterations += 1;
    }

    Ok(FixedPoint {
        energized: EnergizationVector::from_bits(current.into_iter().map(|v| v != 0).collect()),
        iterations,
    })
}

/// Fixed point with the switched adjacency built from the incidence matrix.
pub fn energize(
    incidence: &IncidenceMatrix,
    switches: &SwitchVector,
    sources: &SourceVector,
) -> Result<FixedPoint> {
    if sources.len() != incidence.node_count() {
        return Err(Error::DimensionMismatch {
            expected: incidence.node_count(),
            found: sources.len(),
        });
    }
    let adjacency = adjacency_from_incidence(incidence, switches)?;
    propagate(&adjacency, sources)
}

/// Nodes reachable from a source through closed switches.
pub fn energized_nodes(
    incidence: &IncidenceMatrix,
    switches: &SwitchVector,
    sources: &SourceVector,
) -> Result<EnergizationVector> {
    energize(incidence, switches, sources).map(|fp| fp.energized)
}

/// Energization with the alarming feeder head forced open.
///
/// The dark entries of the result are the nodes that feeder was serving,
/// i.e. the initial suspect set for a tamper alarm at that FRTU.
pub fn energize_with_feeder_open(
    t: &Topology,
    switches: &SwitchVector,
    sources: &SourceVector,
    breaker: EdgeId,
) -> Result<EnergizationVector> {
    t.check_switches(switches)?;
    if !t.contains_edge(breaker) || !t.edge(breaker).is_breaker() {
        return Err(Error::NotABreaker(breaker));
    }
    energized_nodes(&t.incidence_matrix(), &switches.with_open(breaker), sources)
}

/// Nodes whose supply runs through `breaker`: dark once it opens but
/// energized before.
pub fn served_by_feeder(
    t: &Topology,
    switches: &SwitchVector,
    sources: &SourceVector,
    breaker: EdgeId,
) -> Result<Vec<NodeId>> {
    let before = energized_nodes(&t.incidence_matrix(), switches, sources)?;
    let after = energize_with_feeder_open(t, switches, sources, breaker)?;
    Ok(after.zeros_iter().filter(|&n| before.get(n)).collect())
}

/// Per-node supply attribution from a breadth-first sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceMap {
    pub energized: Vec<bool>,
    /// Feeder breaker each energized node is supplied through, if any.
    pub feeder: Vec<Option<EdgeId>>,
}

impl ServiceMap {
    pub fn feeder_of(&self, node: NodeId) -> Option<EdgeId> {
        self.feeder[node.zero_based()]
    }

    pub fn is_energized(&self, node: NodeId) -> bool {
        self.energized[node.zero_based()]
    }

    pub fn served_by(&self, breaker: EdgeId) -> impl Iterator<Item = NodeId> + '_ {
        self.feeder
            .iter()
            .enumerate()
            .filter(move |(_, f)| **f == Some(breaker))
            .map(|(i, _)| NodeId::from_zero_based(i))
    }
}

/// Multi-source BFS recording which feeder head each node hangs off.
///
/// In a radial configuration this agrees with [`served_by_feeder`]; when a
/// transient loop exists the first-reached feeder wins (queue order is
/// source order, then ascending edge id).
pub fn service_map(t: &Topology, switches: &SwitchVector, sources: &SourceVector) -> ServiceMap {
    let n = t.node_count();
    let mut energized = vec![false; n];
    let mut feeder = vec![None; n];
    let mut queue = VecDeque::new();
    for s in sources.ones_iter() {
        energized[s.zero_based()] = true;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        for &e in t.incident_edges(u) {
            if !switches.get(e) {
                continue;
            }
            let v = t.edge(e).other(u);
            if energized[v.zero_based()] {
                continue;
            }
            energized[v.zero_based()] = true;
            feeder[v.zero_based()] = if sources.get(u) {
                t.edge(e).is_breaker().then_some(e)
            } else {
                feeder[u.zero_based()]
            };
            queue.push_back(v);
        }
    }
    ServiceMap { energized, feeder }
}
