//! Distribution network graph, its matrix encodings and the structural and
//! operating-state rules a configuration must satisfy.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::energization::energized_nodes;
use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, IncidenceMatrix};
use crate::vectors::{DgVector, SourceVector, SwitchVector};

macro_rules! one_based_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(usize);

        impl $name {
            /// # Panics
            /// If `index` is zero.
            pub fn new(index: usize) -> Self {
                assert!(index >= 1, concat!(stringify!($name), " is 1-based"));
                Self(index)
            }

            pub fn from_zero_based(index: usize) -> Self {
                Self(index + 1)
            }

            pub fn get(self) -> usize {
                self.0
            }

            pub fn zero_based(self) -> usize {
                self.0 - 1
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

one_based_id!(
    /// Position of a node in the canonical (input) ordering, starting at 1.
    NodeId,
    ""
);
one_based_id!(
    /// Position of an edge in the canonical (input) ordering, starting at 1.
    EdgeId,
    "e"
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    SubstationSource,
    Load,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRole {
    pub kind: NodeKind,
    pub has_dg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchKind {
    /// Feeder head, monitored by an FRTU.
    FeederBreaker,
    Sectionalizer,
    TieSwitch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalState {
    NormallyClosed,
    NormallyOpen,
}

impl SwitchKind {
    pub fn normal_state(self) -> NormalState {
        match self {
            SwitchKind::TieSwitch => NormalState::NormallyOpen,
            SwitchKind::FeederBreaker | SwitchKind::Sectionalizer => NormalState::NormallyClosed,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            SwitchKind::FeederBreaker => "breaker",
            SwitchKind::Sectionalizer => "sectionalizer",
            SwitchKind::TieSwitch => "tie",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
    pub role: NodeRole,
}

impl Node {
    pub fn is_source(&self) -> bool {
        self.role.kind == NodeKind::SubstationSource
    }

    pub fn is_load(&self) -> bool {
        self.role.kind == NodeKind::Load
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub label: String,
    pub kind: SwitchKind,
    pub endpoints: (NodeId, NodeId),
    /// FRTU name; set for every feeder breaker and nothing else.
    pub frtu: Option<String>,
}

impl Edge {
    pub fn other(&self, node: NodeId) -> NodeId {
        if self.endpoints.0 == node {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }

    pub fn touches(&self, node: NodeId) -> bool {
        self.endpoints.0 == node || self.endpoints.1 == node
    }

    pub fn is_breaker(&self) -> bool {
        self.kind == SwitchKind::FeederBreaker
    }
}

// ---------------------------------------------------------------------------
// JSON description

/// Node or edge identifier as written in a topology file; numbers and
/// strings are both accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Num(u64),
    Text(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Num(n) => write!(f, "{n}"),
            Label::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKindSpec {
    Source,
    Load,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKindSpec {
    Breaker,
    Sectionalizer,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: Label,
    pub kind: NodeKindSpec,
    #[serde(default)]
    pub dg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub id: Label,
    pub kind: EdgeKindSpec,
    pub from: Label,
    pub to: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frtu: Option<String>,
}

/// Topology file contents.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TopologySpec {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
}

impl TopologySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

// ---------------------------------------------------------------------------
// Topology

/// Immutable, validated network graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    incident: Vec<Vec<EdgeId>>,
}

/// Validate a topology description and fix its canonical ordering.
pub fn build_topology(spec: &TopologySpec) -> Result<Topology> {
    let mut node_index: HashMap<String, NodeId> = HashMap::new();
    let mut nodes = Vec::with_capacity(spec.nodes.len());
    for (i, n) in spec.nodes.iter().enumerate() {
        let label = n.id.to_string();
        let id = NodeId::from_zero_based(i);
        if node_index.insert(label.clone(), id).is_some() {
            return Err(Error::DuplicateId {
                what: "node",
                id: label,
            });
        }
        let kind = match n.kind {
            NodeKindSpec::Source => NodeKind::SubstationSource,
            NodeKindSpec::Load => NodeKind::Load,
        };
        if kind == NodeKind::SubstationSource && n.dg {
            return Err(Error::InvalidRole {
                node: label,
                reason: "a substation source cannot also be a DG",
            });
        }
        nodes.push(Node {
            id,
            label,
            role: NodeRole { kind, has_dg: n.dg },
        });
    }

    let mut edge_labels = HashSet::new();
    let mut pairs: HashMap<(NodeId, NodeId), String> = HashMap::new();
    let mut frtu_names = HashSet::new();
    let mut breaker_ordinal = 0;
    let mut edges = Vec::with_capacity(spec.edges.len());
    for (j, e) in spec.edges.iter().enumerate() {
        let label = e.id.to_string();
        if !edge_labels.insert(label.clone()) {
            return Err(Error::DuplicateId {
                what: "edge",
                id: label,
            });
        }
        let lookup = |l: &Label| {
            node_index
                .get(&l.to_string())
                .copied()
                .ok_or_else(|| Error::DanglingEndpoint {
                    edge: label.clone(),
                    endpoint: l.to_string(),
                })
        };
        let a = lookup(&e.from)?;
        let b = lookup(&e.to)?;
        if a == b {
            return Err(Error::SelfLoop {
                edge: label,
                node: e.from.to_string(),
            });
        }
        let key = (a.min(b), a.max(b));
        if let Some(other) = pairs.insert(key, label.clone()) {
            return Err(Error::ParallelEdge { edge: label, other });
        }
        let kind = match e.kind {
            EdgeKindSpec::Breaker => SwitchKind::FeederBreaker,
            EdgeKindSpec::Sectionalizer => SwitchKind::Sectionalizer,
            EdgeKindSpec::Tie => SwitchKind::TieSwitch,
        };
        let frtu = match kind {
            SwitchKind::FeederBreaker => {
                let source_ends = [a, b]
                    .iter()
                    .filter(|n| nodes[n.zero_based()].is_source())
                    .count();
                if source_ends != 1 {
                    return Err(Error::BreakerNotAtSource { edge: label });
                }
                breaker_ordinal += 1;
                let name = e
                    .frtu
                    .clone()
                    .unwrap_or_else(|| format!("FRTU_{breaker_ordinal}"));
                if !frtu_names.insert(name.clone()) {
                    return Err(Error::DuplicateId {
                        what: "FRTU",
                        id: name,
                    });
                }
                Some(name)
            }
            _ if e.frtu.is_some() => return Err(Error::FrtuNotOnBreaker { edge: label }),
            _ => None,
        };
        edges.push(Edge {
            id: EdgeId::from_zero_based(j),
            label,
            kind,
            endpoints: (a, b),
            frtu,
        });
    }

    let mut incident = vec![Vec::new(); nodes.len()];
    for e in &edges {
        incident[e.endpoints.0.zero_based()].push(e.id);
        incident[e.endpoints.1.zero_based()].push(e.id);
    }

    let topology = Topology {
        nodes,
        edges,
        incident,
    };
    topology.check_radial_normal_state()?;
    Ok(topology)
}

impl Topology {
    pub fn from_json(text: &str) -> Result<Self> {
        build_topology(&TopologySpec::from_json(text)?)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.zero_based()]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.zero_based()]
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        id.get() <= self.nodes.len()
    }

    pub fn contains_edge(&self, id: EdgeId) -> bool {
        id.get() <= self.edges.len()
    }

    /// Edges touching `node`, ascending.
    pub fn incident_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.incident[node.zero_based()]
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.label == label).map(|n| n.id)
    }

    pub fn breakers(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.is_breaker())
    }

    pub fn frtu_name(&self, breaker: EdgeId) -> Option<&str> {
        self.edge(breaker).frtu.as_deref()
    }

    pub fn breaker_for_frtu(&self, name: &str) -> Option<EdgeId> {
        self.breakers()
            .find(|e| e.frtu.as_deref() == Some(name))
            .map(|e| e.id)
    }

    /// `V_s`: substation sources.
    pub fn source_vector(&self) -> SourceVector {
        SourceVector::from_bits(self.nodes.iter().map(Node::is_source).collect())
    }

    /// `V_g`: nodes with a distributed generator.
    pub fn dg_vector(&self) -> DgVector {
        DgVector::from_bits(self.nodes.iter().map(|n| n.role.has_dg).collect())
    }

    /// Every normally-closed edge closed, every tie open.
    pub fn normal_switches(&self) -> SwitchVector {
        SwitchVector::from_bits(
            self.edges
                .iter()
                .map(|e| e.kind.normal_state() == NormalState::NormallyClosed)
                .collect(),
        )
    }

    pub fn incidence_matrix(&self) -> IncidenceMatrix {
        incidence_matrix(self)
    }

    pub fn check_switches(&self, switches: &SwitchVector) -> Result<()> {
        if switches.len() != self.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: self.edge_count(),
                found: switches.len(),
            });
        }
        Ok(())
    }

    fn check_radial_normal_state(&self) -> Result<()> {
        let normal = self.normal_switches();
        let mut sets = GroundedSets::new(self);
        for e in &self.edges {
            if normal.get(e.id) && !sets.union(e.endpoints.0, e.endpoints.1) {
                return Err(Error::NonRadialNormalState(format!(
                    "closing {} ({}) completes a loop",
                    e.id,
                    e.kind.short_name()
                )));
            }
        }
        if let Some(n) = self
            .nodes
            .iter()
            .find(|n| n.is_load() && !sets.grounded(n.id))
        {
            return Err(Error::NonRadialNormalState(format!(
                "load node {} is not fed by any source",
                n.id
            )));
        }
        Ok(())
    }
}

/// `M_i[i, j] = 1` iff node `i` is an endpoint of edge `j`.
pub fn incidence_matrix(t: &Topology) -> IncidenceMatrix {
    let mut m = BinaryMatrix::zeros(t.node_count(), t.edge_count());
    for e in &t.edges {
        let col = e.id.zero_based();
        m.set(e.endpoints.0.zero_based(), col, true);
        m.set(e.endpoints.1.zero_based(), col, true);
    }
    IncidenceMatrix(m)
}

// ---------------------------------------------------------------------------
// Operating state validation

/// Union-find in which every substation source is pre-merged into a common
/// ground, so a closed path between two substations counts as a loop.
struct GroundedSets {
    parent: Vec<usize>,
    ground: usize,
}

impl GroundedSets {
    fn new(t: &Topology) -> Self {
        let ground = t.node_count();
        let parent = (0..=ground)
            .map(|i| {
                if i < ground && t.nodes[i].is_source() {
                    ground
                } else {
                    i
                }
            })
            .collect();
        Self { parent, ground }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: NodeId, b: NodeId) -> bool {
        let ra = self.find(a.zero_based());
        let rb = self.find(b.zero_based());
        if ra == rb {
            return false;
        }
        // keep ground as a root so `grounded` stays a single lookup
        if rb == self.ground {
            self.parent[ra] = rb;
        } else {
            self.parent[rb] = ra;
        }
        true
    }

    fn grounded(&mut self, n: NodeId) -> bool {
        let g = self.ground;
        self.find(n.zero_based()) == g
    }
}

/// Connected components over closed edges, each sorted ascending, in order
/// of their smallest node.
pub fn closed_components(t: &Topology, switches: &SwitchVector) -> Vec<Vec<NodeId>> {
    let mut seen = vec![false; t.node_count()];
    let mut out = Vec::new();
    for start in 0..t.node_count() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![NodeId::from_zero_based(start)];
        let mut comp = Vec::new();
        while let Some(n) = stack.pop() {
            comp.push(n);
            for &e in t.incident_edges(n) {
                if switches.get(e) {
                    let m = t.edge(e).other(n);
                    if !seen[m.zero_based()] {
                        seen[m.zero_based()] = true;
                        stack.push(m);
                    }
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OperatingState {
    pub allow_loops: bool,
    /// Closed edges that complete a loop (including source-to-source paths).
    pub loop_edges: Vec<EdgeId>,
    /// Load nodes not reachable from any substation source.
    pub de_energized: Vec<NodeId>,
    /// Components with a DG node but no substation source.
    pub dg_islands: Vec<Vec<NodeId>>,
}

impl OperatingState {
    pub fn has_loops(&self) -> bool {
        !self.loop_edges.is_empty()
    }

    /// Dark loads not covered by a DG island.
    pub fn unserved_loads(&self) -> Vec<NodeId> {
        let island: HashSet<NodeId> = self.dg_islands.iter().flatten().copied().collect();
        self.de_energized
            .iter()
            .copied()
            .filter(|n| !island.contains(n))
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        (self.allow_loops || !self.has_loops()) && self.unserved_loads().is_empty()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.allow_loops {
            out.extend(
                self.loop_edges
                    .iter()
                    .map(|e| format!("closed loop through {e}")),
            );
        }
        out.extend(
            self.unserved_loads()
                .iter()
                .map(|n| format!("load {n} de-energized")),
        );
        out
    }
}

/// Check a switch configuration against the operating rules: no loops
/// (unless allowed), every load energized or inside a DG island.
pub fn validate_operating_state(
    t: &Topology,
    switches: &SwitchVector,
    allow_loops: bool,
) -> Result<OperatingState> {
    t.check_switches(switches)?;

    let mut sets = GroundedSets::new(t);
    let loop_edges = t
        .edges
        .iter()
        .filter(|e| switches.get(e.id))
        .filter(|e| !sets.union(e.endpoints.0, e.endpoints.1))
        .map(|e| e.id)
        .collect();

    let energized = energized_nodes(&t.incidence_matrix(), switches, &t.source_vector())?;
    let de_energized = energized
        .zeros_iter()
        .filter(|&n| t.node(n).is_load())
        .collect::<Vec<_>>();

    let dg_islands = closed_components(t, switches)
        .into_iter()
        .filter(|c| {
            c.iter().all(|&n| !t.node(n).is_source()) && c.iter().any(|&n| t.node(n).role.has_dg)
        })
        .collect();

    Ok(OperatingState {
        allow_loops,
        loop_edges,
        de_energized,
        dg_islands,
    })
}
