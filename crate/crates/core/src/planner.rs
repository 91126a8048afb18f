//! Switching-sequence planner that narrows an FRTU tamper alarm down to the
//! tampered node(s).
//!
//! An episode keeps two pieces of knowledge, both updated after every FRTU
//! check:
//!
//! * the *exonerated* nodes, served by a feeder whose FRTU read clean, and
//! * a family of *positive groups*, node sets known to contain at least one
//!   tampered node (one per alarming FRTU, minus exonerated nodes).
//!
//! Only inclusion-minimal groups are kept; the suspect set is their union.
//! The episode is finished when every group is a single node.
//!
//! Each reconfiguration is make-before-break: a closing action comes first
//! and the paired opening restores radiality, so every committed state keeps
//! all non-island loads energized.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::energization::{
    energize_with_feeder_open, energized_nodes, served_by_feeder, service_map,
};
use crate::error::{Error, Result};
use crate::metering::{frtu_alarms, simulate_interval, CustomerMeter, SimConfig};
use crate::topology::{validate_operating_state, EdgeId, NodeId, SwitchKind, Topology};
use crate::vectors::{DgVector, SourceVector, SwitchVector};

/// Alarm state per FRTU, keyed by its feeder breaker.
pub type Alarms = BTreeMap<EdgeId, bool>;

type Move = Vec<(EdgeId, Action)>;

fn apply_moves(state: &SwitchVector, moves: &[(EdgeId, Action)]) -> SwitchVector {
    let mut next = state.clone();
    for &(e, action) in moves {
        next.set(e, action == Action::Close);
    }
    next
}

/// Source of FRTU alarm readings for a switch configuration.
pub trait MeasurementOracle {
    fn alarms(&mut self, switches: &SwitchVector) -> Result<Alarms>;
}

impl<F> MeasurementOracle for F
where
    F: FnMut(&SwitchVector) -> Result<Alarms>,
{
    fn alarms(&mut self, switches: &SwitchVector) -> Result<Alarms> {
        self(switches)
    }
}

/// Noise-free oracle: an FRTU alarms iff its feeder serves a tampered node.
#[derive(Debug, Clone)]
pub struct IdealOracle<'a> {
    topology: &'a Topology,
    tampered: BTreeSet<NodeId>,
}

impl<'a> IdealOracle<'a> {
    pub fn new(topology: &'a Topology, tampered: impl IntoIterator<Item = NodeId>) -> Self {
        Self {
            topology,
            tampered: tampered.into_iter().collect(),
        }
    }
}

impl MeasurementOracle for IdealOracle<'_> {
    fn alarms(&mut self, switches: &SwitchVector) -> Result<Alarms> {
        self.topology.check_switches(switches)?;
        let map = service_map(self.topology, switches, &self.topology.source_vector());
        Ok(self
            .topology
            .breakers()
            .map(|b| {
                (
                    b.id,
                    map.served_by(b.id).any(|n| self.tampered.contains(&n)),
                )
            })
            .collect())
    }
}

/// Oracle backed by the metering simulator and the discrepancy trigger.
///
/// Every query simulates the same interval index, so the answer is a pure
/// function of the switch state.
#[derive(Debug, Clone)]
pub struct MeteringOracle<'a> {
    pub topology: &'a Topology,
    pub meters: Vec<CustomerMeter>,
    pub config: SimConfig,
    pub seed: u64,
    pub interval: u64,
    pub threshold: f64,
}

impl MeasurementOracle for MeteringOracle<'_> {
    fn alarms(&mut self, switches: &SwitchVector) -> Result<Alarms> {
        let interval = simulate_interval(
            self.topology,
            switches,
            &self.meters,
            &self.config,
            self.seed,
            self.interval,
        )?;
        frtu_alarms(&interval, self.threshold)
    }
}

/// Replays previously recorded answers.
#[derive(Debug, Clone, Default)]
pub struct RecordedOracle {
    pub answers: HashMap<SwitchVector, Alarms>,
}

impl MeasurementOracle for RecordedOracle {
    fn alarms(&mut self, switches: &SwitchVector) -> Result<Alarms> {
        self.answers
            .get(switches)
            .cloned()
            .ok_or_else(|| Error::OracleInconsistent(format!("no recorded reading for {switches}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Open,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SwitchingAction {
    pub step: usize,
    /// Make-before-break move this action belongs to, from 1. A loop may
    /// stand only while an opening action of the same move is pending.
    pub move_index: usize,
    pub edge: EdgeId,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    /// 1-based index of the oracle query this reading belongs to.
    pub query: usize,
    pub frtu: String,
    pub breaker: EdgeId,
    pub alarm: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalizationReport {
    pub trigger: Option<EdgeId>,
    pub actions: Vec<SwitchingAction>,
    pub checks: Vec<Check>,
    pub suspect_history: Vec<Vec<NodeId>>,
    pub final_suspects: Vec<NodeId>,
    /// DG nodes isolated as islands during the episode.
    pub islands: Vec<Vec<NodeId>>,
    /// DG nodes left connected because isolating them would strand a load.
    pub skipped_dg: Vec<NodeId>,
    /// The alarm vanished once the DG islands were isolated.
    pub alarm_cleared_by_isolation: bool,
    /// No feasible switching separates the remaining suspects.
    pub irreducible: bool,
    pub constraint_violations: Vec<String>,
    /// Oracle queries issued after the trigger reading.
    pub queries: usize,
    pub final_switches: SwitchVector,
    #[serde(skip)]
    pub log: Vec<String>,
}

impl LocalizationReport {
    fn empty(switches: SwitchVector) -> Self {
        Self {
            trigger: None,
            actions: Vec::new(),
            checks: Vec::new(),
            suspect_history: Vec::new(),
            final_suspects: Vec::new(),
            islands: Vec::new(),
            skipped_dg: Vec::new(),
            alarm_cleared_by_isolation: false,
            irreducible: false,
            constraint_violations: Vec::new(),
            queries: 0,
            final_switches: switches,
            log: Vec::new(),
        }
    }

    /// Report for a configuration with no alarm: nothing to localize.
    pub fn quiet(switches: SwitchVector) -> Self {
        let mut r = Self::empty(switches);
        r.log.push("no FRTU alarm; nothing to localize".into());
        r
    }

    pub fn step_log(&self) -> String {
        let mut out = String::new();
        for line in &self.log {
            let _ = writeln!(out, "{line}");
        }
        out
    }
}

fn fmt_nodes<'a>(nodes: impl IntoIterator<Item = &'a NodeId>) -> String {
    let parts: Vec<String> = nodes.into_iter().map(|n| n.to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

// ---------------------------------------------------------------------------
// Spanning forest helpers

/// BFS forest of the closed edges rooted at the sources.
struct Forest {
    parent: Vec<Option<(EdgeId, NodeId)>>,
    depth: Vec<usize>,
    energized: Vec<bool>,
}

impl Forest {
    fn new(t: &Topology, switches: &SwitchVector, sources: &SourceVector) -> Self {
        let n = t.node_count();
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut energized = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        for s in sources.ones_iter() {
            energized[s.zero_based()] = true;
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            for &e in t.incident_edges(u) {
                let v = t.edge(e).other(u);
                if switches.get(e) && !energized[v.zero_based()] {
                    energized[v.zero_based()] = true;
                    parent[v.zero_based()] = Some((e, u));
                    depth[v.zero_based()] = depth[u.zero_based()] + 1;
                    queue.push_back(v);
                }
            }
        }
        Self {
            parent,
            depth,
            energized,
        }
    }

    fn is_energized(&self, n: NodeId) -> bool {
        self.energized[n.zero_based()]
    }

    /// Closed edges on the loop formed by closing an edge between `x` and
    /// `y`. Sources share a common ground, so two different feeders close a
    /// loop through their breakers.
    fn loop_edges(&self, mut x: NodeId, mut y: NodeId) -> Vec<EdgeId> {
        let mut path = Vec::new();
        loop {
            if x == y {
                break;
            }
            let (dx, dy) = (self.depth[x.zero_based()], self.depth[y.zero_based()]);
            let px = self.parent[x.zero_based()];
            let py = self.parent[y.zero_based()];
            match (px, py) {
                (None, None) => break,
                (Some((e, p)), _) if dx >= dy => {
                    path.push(e);
                    x = p;
                }
                (_, Some((e, p))) => {
                    path.push(e);
                    y = p;
                }
                (Some((e, p)), None) => {
                    path.push(e);
                    x = p;
                }
            }
        }
        path
    }
}

// ---------------------------------------------------------------------------
// DG isolation

/// Result of isolating DG nodes into islands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Isolation {
    pub switches: SwitchVector,
    pub actions: Vec<SwitchingAction>,
    pub islands: Vec<Vec<NodeId>>,
}

/// Make-before-break plan cutting DG node `dg` off from every substation.
///
/// Opens each closed edge touching `dg`; loads that would lose supply are
/// first picked up through open switches (lowest edge id first) that link
/// them to a still-energized node. Switches touching `dg` or an existing
/// island are never used for that.
fn isolation_plan(
    t: &Topology,
    switches: &SwitchVector,
    sources: &SourceVector,
    dg: NodeId,
    islands: &BTreeSet<NodeId>,
) -> Result<Vec<(EdgeId, Action)>> {
    let to_open: Vec<EdgeId> = t
        .incident_edges(dg)
        .iter()
        .copied()
        .filter(|&e| switches.get(e))
        .collect();
    let mut trial = switches.clone();
    for &e in &to_open {
        trial.set(e, false);
    }
    let incidence = t.incidence_matrix();
    let needs_supply = |energized: &crate::vectors::EnergizationVector| {
        t.nodes()
            .iter()
            .filter(|n| n.is_load() && n.id != dg && !islands.contains(&n.id))
            .any(|n| !energized.get(n.id))
    };

    let mut closes = Vec::new();
    let mut energized = energized_nodes(&incidence, &trial, sources)?;
    while needs_supply(&energized) {
        let pick = t.edges().iter().find(|e| {
            let (a, b) = e.endpoints;
            !trial.get(e.id)
                && e.kind != SwitchKind::FeederBreaker
                && !e.touches(dg)
                && !islands.contains(&a)
                && !islands.contains(&b)
                && energized.get(a) != energized.get(b)
        });
        let Some(edge) = pick else {
            return Err(Error::InfeasibleIsolation(dg));
        };
        trial.set(edge.id, true);
        closes.push(edge.id);
        energized = energized_nodes(&incidence, &trial, sources)?;
    }

    Ok(closes
        .into_iter()
        .map(|e| (e, Action::Close))
        .chain(to_open.into_iter().map(|e| (e, Action::Open)))
        .collect())
}

/// Isolate every DG node flagged in `dgs` into its own island.
pub fn isolate_dg_islands(
    t: &Topology,
    switches: &SwitchVector,
    dgs: &DgVector,
) -> Result<Isolation> {
    t.check_switches(switches)?;
    if dgs.len() != t.node_count() {
        return Err(Error::DimensionMismatch {
            expected: t.node_count(),
            found: dgs.len(),
        });
    }
    let sources = t.source_vector();
    let mut state = switches.clone();
    let mut actions = Vec::new();
    let mut island_nodes = BTreeSet::new();
    let mut islands = Vec::new();
    for (k, dg) in dgs.ones_iter().enumerate() {
        if !t.node(dg).role.has_dg {
            return Err(Error::InvalidParameter(format!(
                "node {dg} has no distributed generator"
            )));
        }
        for (edge, action) in isolation_plan(t, &state, &sources, dg, &island_nodes)? {
            state.set(edge, action == Action::Close);
            actions.push(SwitchingAction {
                step: actions.len() + 1,
                move_index: k + 1,
                edge,
                action,
            });
        }
        island_nodes.insert(dg);
        islands.push(vec![dg]);
    }
    Ok(Isolation {
        switches: state,
        actions,
        islands,
    })
}

// ---------------------------------------------------------------------------
// Episode

struct Episode<'a, O: MeasurementOracle + ?Sized> {
    t: &'a Topology,
    sources: &'a SourceVector,
    oracle: &'a mut O,
    memo: HashMap<SwitchVector, Alarms>,
    state: SwitchVector,
    /// Isolated DG node -> edges opened to isolate it.
    islands: BTreeMap<NodeId, Vec<EdgeId>>,
    exonerated: BTreeSet<NodeId>,
    groups: Vec<BTreeSet<NodeId>>,
    primary: Option<EdgeId>,
    queried: HashSet<SwitchVector>,
    report: LocalizationReport,
}

impl<'a, O: MeasurementOracle + ?Sized> Episode<'a, O> {
    fn new(t: &'a Topology, sources: &'a SourceVector, oracle: &'a mut O, v: SwitchVector) -> Self {
        Self {
            t,
            sources,
            oracle,
            memo: HashMap::new(),
            state: v.clone(),
            islands: BTreeMap::new(),
            exonerated: BTreeSet::new(),
            groups: Vec::new(),
            primary: None,
            queried: HashSet::new(),
            report: LocalizationReport::empty(v),
        }
    }

    fn suspects(&self) -> BTreeSet<NodeId> {
        self.groups.iter().flatten().copied().collect()
    }

    fn resolved(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    fn island_set(&self) -> BTreeSet<NodeId> {
        self.islands.keys().copied().collect()
    }

    fn push_history(&mut self) {
        let s: Vec<NodeId> = self.suspects().into_iter().collect();
        self.report.log.push(format!("suspects {}", fmt_nodes(&s)));
        self.report.suspect_history.push(s);
    }

    fn read(&mut self) -> Result<Alarms> {
        if let Some(a) = self.memo.get(&self.state) {
            return Ok(a.clone());
        }
        let a = self.oracle.alarms(&self.state)?;
        self.memo.insert(self.state.clone(), a.clone());
        Ok(a)
    }

    /// Commit one make-before-break move, validating every intermediate state.
    fn apply(&mut self, actions: &[(EdgeId, Action)]) -> Result<()> {
        let move_index = self.report.actions.last().map_or(0, |a| a.move_index) + 1;
        for (k, &(edge, action)) in actions.iter().enumerate() {
            self.state.set(edge, action == Action::Close);
            let step = self.report.actions.len() + 1;
            self.report.actions.push(SwitchingAction {
                step,
                move_index,
                edge,
                action,
            });
            let kind = self.t.edge(edge).kind.short_name();
            let verb = if action == Action::Close {
                "close"
            } else {
                "open"
            };
            self.report
                .log
                .push(format!("step {step}: {verb} {edge} ({kind})"));

            let open_pending = actions[k + 1..].iter().any(|&(_, a)| a == Action::Open);
            let st = validate_operating_state(self.t, &self.state, open_pending)?;
            let violations = st.violations();
            if !violations.is_empty() {
                let msg = format!("after step {step}: {}", violations.join("; "));
                self.report.constraint_violations.push(msg.clone());
                return Err(Error::InfeasiblePlan(msg));
            }
        }
        Ok(())
    }

    /// Read the FRTUs in the current state and fold the answer into the
    /// episode's knowledge. `record` distinguishes checks from the trigger.
    fn observe(&mut self, record: bool) -> Result<Alarms> {
        let alarms = self.read()?;
        self.queried.insert(self.state.clone());
        let before = self.suspects();

        let mut served = BTreeMap::new();
        for &b in alarms.keys() {
            if !self.t.contains_edge(b) || !self.t.edge(b).is_breaker() {
                return Err(Error::OracleInconsistent(format!(
                    "reading for non-FRTU edge {b}"
                )));
            }
            served.insert(b, served_by_feeder(self.t, &self.state, self.sources, b)?);
        }

        if record {
            self.report.queries += 1;
            let query = self.report.queries;
            let mut order: Vec<EdgeId> = alarms
                .iter()
                .filter(|(b, &alarm)| alarm || served[*b].iter().any(|n| before.contains(n)))
                .map(|(&b, _)| b)
                .collect();
            order.sort_by_key(|&b| (Some(b) != self.primary, b));
            for b in order {
                let frtu = self.t.frtu_name(b).unwrap_or_default().to_string();
                let alarm = alarms[&b];
                self.report.log.push(format!(
                    "check {frtu} ({})",
                    if alarm { "alarm" } else { "clear" }
                ));
                self.report.checks.push(Check {
                    query,
                    frtu,
                    breaker: b,
                    alarm,
                });
            }
        }

        for (b, &alarm) in &alarms {
            if !alarm {
                self.exonerated.extend(served[b].iter().copied());
            }
        }
        for g in &mut self.groups {
            g.retain(|n| !self.exonerated.contains(n));
            if g.is_empty() {
                return Err(Error::OracleInconsistent(
                    "every node of an alarmed set has since read clean".into(),
                ));
            }
        }
        for (b, &alarm) in &alarms {
            if alarm {
                let q: BTreeSet<NodeId> = served[b]
                    .iter()
                    .copied()
                    .filter(|n| !self.exonerated.contains(n))
                    .collect();
                if q.is_empty() {
                    return Err(Error::OracleInconsistent(format!(
                        "{} alarms but serves no unexonerated node",
                        self.t.frtu_name(*b).unwrap_or_default()
                    )));
                }
                self.groups.push(q);
            }
        }
        self.minimize_groups();
        Ok(alarms)
    }

    fn minimize_groups(&mut self) {
        let mut groups = std::mem::take(&mut self.groups);
        groups.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        groups.dedup();
        let mut kept: Vec<BTreeSet<NodeId>> = Vec::new();
        for g in groups {
            if !kept.iter().any(|k| k.is_subset(&g)) {
                kept.push(g);
            }
        }
        kept.sort();
        self.groups = kept;
    }

    fn isolate(&mut self, dg: NodeId) -> Result<bool> {
        let islands = self.island_set();
        match isolation_plan(self.t, &self.state, self.sources, dg, &islands) {
            Ok(plan) => {
                self.report.log.push(format!("isolate DG node {dg}"));
                self.apply(&plan)?;
                let opened = plan
                    .iter()
                    .filter(|(_, a)| *a == Action::Open)
                    .map(|(e, _)| *e);
                self.islands.insert(dg, opened.collect());
                self.report.islands.push(vec![dg]);
                Ok(true)
            }
            Err(Error::InfeasibleIsolation(_)) => {
                self.report
                    .log
                    .push(format!("DG node {dg} cannot be isolated; left connected"));
                self.report.skipped_dg.push(dg);
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    /// Closing this edge hooks island `dg` back onto a feeder.
    fn reconnection_edge(&self, dg: NodeId, forest: &Forest) -> Option<EdgeId> {
        let islands = self.island_set();
        self.t.incident_edges(dg).iter().copied().find(|&e| {
            let other = self.t.edge(e).other(dg);
            !self.state.get(e) && forest.is_energized(other) && !islands.contains(&other)
        })
    }

    fn reconnect(&mut self, dg: NodeId) -> Result<bool> {
        let forest = Forest::new(self.t, &self.state, self.sources);
        let Some(edge) = self.reconnection_edge(dg, &forest) else {
            return Ok(false);
        };
        self.report.log.push(format!("restore island {{{dg}}}"));
        self.apply(&[(edge, Action::Close)])?;
        self.islands.remove(&dg);
        Ok(true)
    }

    /// Reconnect suspect islands one at a time, checking after each. Stops
    /// once the suspects are resolved, or with `until_alarm` at the first
    /// reading that alarms.
    fn restore_sequentially(&mut self, until_alarm: bool) -> Result<()> {
        loop {
            if !until_alarm && self.resolved() {
                break;
            }
            let suspects = self.suspects();
            let Some(dg) = self.islands.keys().copied().find(|d| suspects.contains(d)) else {
                break;
            };
            if !self.reconnect(dg)? {
                self.report.irreducible = true;
                break;
            }
            let alarms = self.observe(true)?;
            self.push_history();
            if until_alarm && alarms.values().any(|&a| a) {
                break;
            }
        }
        Ok(())
    }

    /// Single make-before-break moves available from `state`: close an open
    /// switch and open a non-breaker switch on the loop it forms, or hook a
    /// suspect island back onto a feeder.
    fn moves_from(&self, state: &SwitchVector, group: &BTreeSet<NodeId>) -> Vec<Move> {
        let forest = Forest::new(self.t, state, self.sources);
        let islands: BTreeSet<NodeId> = self
            .island_set()
            .into_iter()
            .filter(|&d| self.t.incident_edges(d).iter().all(|&e| !state.get(e)))
            .collect();
        let mut moves = Vec::new();
        for a in self.t.edges() {
            let (x, y) = a.endpoints;
            if state.get(a.id)
                || islands.contains(&x)
                || islands.contains(&y)
                || !forest.is_energized(x)
                || !forest.is_energized(y)
            {
                continue;
            }
            for b in forest.loop_edges(x, y) {
                if self.t.edge(b).kind != SwitchKind::FeederBreaker {
                    moves.push(vec![(a.id, Action::Close), (b, Action::Open)]);
                }
            }
        }
        for &dg in islands.iter().filter(|d| group.contains(d)) {
            let link = self.t.incident_edges(dg).iter().copied().find(|&e| {
                let other = self.t.edge(e).other(dg);
                !state.get(e) && forest.is_energized(other) && !islands.contains(&other)
            });
            if let Some(e) = link {
                moves.push(vec![(e, Action::Close)]);
            }
        }
        moves
    }

    /// How well the state reached by `moves` splits `group` across FRTUs:
    /// `(largest class, other suspects sharing a class feeder)`, or `None`
    /// if the group stays in one class or the state was already read.
    fn split_quality(
        &self,
        moves: &Move,
        group: &BTreeSet<NodeId>,
        others: &BTreeSet<NodeId>,
    ) -> Option<(usize, usize)> {
        let next = apply_moves(&self.state, moves);
        if self.queried.contains(&next) {
            return None;
        }
        let map = service_map(self.t, &next, self.sources);
        let mut classes: BTreeMap<Option<EdgeId>, usize> = BTreeMap::new();
        for &n in group {
            *classes.entry(map.feeder_of(n)).or_default() += 1;
        }
        if classes.len() < 2 {
            return None;
        }
        let largest = classes.values().copied().max().unwrap_or(0);
        let contamination = others
            .iter()
            .filter(|&&n| {
                map.feeder_of(n)
                    .is_some_and(|f| classes.contains_key(&Some(f)))
            })
            .count();
        Some((largest, contamination))
    }

    /// Best informative move for splitting `group`: a single move when one
    /// exists, else two chained moves.
    fn best_move(&self, group: &BTreeSet<NodeId>) -> Option<Move> {
        let others: BTreeSet<NodeId> = self
            .suspects()
            .into_iter()
            .filter(|n| !group.contains(n))
            .collect();
        let singles = self.moves_from(&self.state, group);
        let pick = |candidates: Vec<Move>| {
            candidates
                .into_iter()
                .filter_map(|m| {
                    let (largest, contamination) = self.split_quality(&m, group, &others)?;
                    let edges: Vec<usize> = m.iter().map(|(e, _)| e.get()).collect();
                    Some(((largest, contamination, m.len(), edges), m))
                })
                .min_by(|a, b| a.0.cmp(&b.0))
                .map(|(_, m)| m)
        };
        if let Some(m) = pick(singles.clone()) {
            return Some(m);
        }
        let mut seen = HashSet::new();
        let mut doubles = Vec::new();
        for first in singles {
            let mid = apply_moves(&self.state, &first);
            for second in self.moves_from(&mid, group) {
                let end = apply_moves(&mid, &second);
                if end != self.state && seen.insert(end) {
                    doubles.push(first.iter().chain(&second).copied().collect());
                }
            }
        }
        pick(doubles)
    }

    fn bisect(&mut self) -> Result<()> {
        let budget = 4 * (self.t.node_count() + self.t.edge_count()) + 16;
        for _ in 0..budget {
            if self.resolved() {
                return Ok(());
            }
            let Some(group) = self.groups.iter().find(|g| g.len() > 1).cloned() else {
                return Ok(());
            };
            let Some(moves) = self.best_move(&group) else {
                // islands block switching paths; bring one back and retry
                let islands: Vec<NodeId> = self.islands.keys().copied().collect();
                let mut restored = false;
                for dg in islands {
                    if self.reconnect(dg)? {
                        restored = true;
                        break;
                    }
                }
                if restored {
                    continue;
                }
                break;
            };
            self.apply(&moves)?;
            self.observe(true)?;
            self.push_history();
        }
        if !self.resolved() {
            self.report.irreducible = true;
            self.report
                .log
                .push("no switching separates the remaining suspects".into());
        }
        Ok(())
    }

    fn finish(mut self) -> LocalizationReport {
        let suspects: Vec<NodeId> = self.suspects().into_iter().collect();
        let verdict = match (self.report.irreducible, suspects.as_slice()) {
            (_, []) => "verdict: none".to_string(),
            (false, [n]) => format!("verdict: node {n}"),
            (false, many) => format!(
                "verdict: nodes {}",
                many.iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            (true, many) => format!("verdict: irreducible {}", fmt_nodes(many)),
        };
        self.report.log.push(verdict);
        self.report.final_suspects = suspects;
        self.report.final_switches = self.state.clone();
        self.report
    }
}

fn check_lengths(t: &Topology, v: &SwitchVector, s: &SourceVector) -> Result<()> {
    t.check_switches(v)?;
    if s.len() != t.node_count() {
        return Err(Error::DimensionMismatch {
            expected: t.node_count(),
            found: s.len(),
        });
    }
    Ok(())
}

fn check_start_state(t: &Topology, v: &SwitchVector) -> Result<()> {
    let st = validate_operating_state(t, v, false)?;
    if !st.is_valid() {
        return Err(Error::InfeasiblePlan(format!(
            "starting state violates constraints: {}",
            st.violations().join("; ")
        )));
    }
    Ok(())
}

/// Reconnect DG islands one at a time while no feeder alarms, checking the
/// FRTUs after each; the island whose return raises an alarm holds the
/// tampered load.
pub fn sequential_restoration<O: MeasurementOracle + ?Sized>(
    t: &Topology,
    switches: &SwitchVector,
    islands: &[Vec<NodeId>],
    oracle: &mut O,
) -> Result<LocalizationReport> {
    let sources = t.source_vector();
    check_lengths(t, switches, &sources)?;
    let mut ep = Episode::new(t, &sources, oracle, switches.clone());
    if islands.is_empty() {
        return Ok(ep.finish());
    }
    for island in islands {
        for &n in island {
            if !t.contains_node(n) {
                return Err(Error::UnknownNode(n.to_string()));
            }
            let opened = t
                .incident_edges(n)
                .iter()
                .copied()
                .filter(|&e| !switches.get(e));
            ep.islands.insert(n, opened.collect());
        }
    }
    ep.groups = vec![ep.island_set()];
    let baseline = ep.observe(false)?;
    if baseline.values().any(|&a| a) {
        return Err(Error::OracleInconsistent(
            "feeder alarms present before restoration".into(),
        ));
    }
    ep.push_history();
    ep.restore_sequentially(true)?;
    Ok(ep.finish())
}

/// Localize the tampered node(s) behind an alarm at breaker `trigger`.
///
/// 1. Open the alarming feeder head in the energization fixed point; its
///    dark nodes are the first suspects.
/// 2. Isolate suspect DG nodes into islands and check the FRTUs. If the
///    alarm disappears the tamper sits in an island, found by restoring
///    islands one by one.
/// 3. Otherwise bisect: repeatedly close an open switch and open another on
///    the loop it forms, choosing the pair that splits the suspects most
///    evenly across FRTUs, until each alarm is pinned to a single node.
///
/// Every FRTU reading, including a fresh alarm on another feeder, is folded
/// into the same knowledge, so several tampered nodes are reported together.
pub fn localize<O: MeasurementOracle + ?Sized>(
    t: &Topology,
    switches: &SwitchVector,
    sources: &SourceVector,
    dgs: &DgVector,
    trigger: EdgeId,
    oracle: &mut O,
) -> Result<LocalizationReport> {
    check_lengths(t, switches, sources)?;
    if dgs.len() != t.node_count() {
        return Err(Error::DimensionMismatch {
            expected: t.node_count(),
            found: dgs.len(),
        });
    }
    let opened = energize_with_feeder_open(t, switches, sources, trigger)?;
    check_start_state(t, switches)?;
    let before = energized_nodes(&t.incidence_matrix(), switches, sources)?;
    let initial: BTreeSet<NodeId> = opened.zeros_iter().filter(|&n| before.get(n)).collect();
    let frtu = t.frtu_name(trigger).unwrap_or_default().to_string();
    if initial.is_empty() {
        return Err(Error::OracleInconsistent(format!(
            "{frtu} alarms but serves no load"
        )));
    }

    let mut ep = Episode::new(t, sources, oracle, switches.clone());
    ep.primary = Some(trigger);
    ep.report.trigger = Some(trigger);
    ep.report.log.push(format!(
        "alarm at {frtu} ({trigger}); opening it darkens {}",
        fmt_nodes(&initial)
    ));
    ep.groups = vec![initial.clone()];
    ep.push_history();

    let baseline = ep.observe(false)?;
    if baseline.get(&trigger) != Some(&true) {
        return Err(Error::OracleInconsistent(format!(
            "{frtu} does not alarm in the starting state"
        )));
    }
    if ep.suspects() != initial {
        ep.push_history();
    }

    if !ep.resolved() {
        let candidates: Vec<NodeId> = dgs
            .ones_iter()
            .filter(|d| ep.suspects().contains(d) && t.node(*d).is_load())
            .collect();
        let mut any = false;
        for dg in candidates {
            any |= ep.isolate(dg)?;
        }
        if any {
            let suspects_before = ep.suspects();
            let alarms = ep.observe(true)?;
            let measured_alarm = alarms.iter().any(|(b, &a)| {
                a && served_by_feeder(t, &ep.state, sources, *b)
                    .map(|s| s.iter().any(|n| suspects_before.contains(n)))
                    .unwrap_or(false)
            });
            if !measured_alarm {
                ep.report.alarm_cleared_by_isolation = true;
                ep.report
                    .log
                    .push("alarm cleared with DG islands isolated".into());
            }
            ep.push_history();
            if ep.report.alarm_cleared_by_isolation {
                ep.restore_sequentially(false)?;
            }
        }
    }

    ep.bisect()?;
    Ok(ep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::{ct8, ct8_spec};
    use crate::topology::build_topology;

    fn n(i: usize) -> NodeId {
        NodeId::new(i)
    }

    fn e(i: usize) -> EdgeId {
        EdgeId::new(i)
    }

    fn run(tampered: &[usize]) -> LocalizationReport {
        let t = ct8();
        let mut oracle = IdealOracle::new(&t, tampered.iter().map(|&i| n(i)));
        localize(
            &t,
            &t.normal_switches(),
            &t.source_vector(),
            &t.dg_vector(),
            e(7),
            &mut oracle,
        )
        .unwrap()
    }

    #[test]
    fn isolating_node_six() {
        let t = ct8();
        let iso = isolate_dg_islands(&t, &t.normal_switches(), &t.dg_vector()).unwrap();
        assert_eq!(iso.switches.to_string(), "1111001");
        assert_eq!(iso.islands, vec![vec![n(6)]]);
        let acts: Vec<_> = iso
            .actions
            .iter()
            .map(|a| (a.step, a.edge, a.action))
            .collect();
        assert_eq!(
            acts,
            vec![
                (1, e(4), Action::Close),
                (2, e(5), Action::Open),
                (3, e(6), Action::Open)
            ]
        );
    }

    #[test]
    fn no_dg_means_no_isolation() {
        let t = ct8();
        let iso = isolate_dg_islands(&t, &t.normal_switches(), &DgVector::zeros(8)).unwrap();
        assert_eq!(iso.switches, t.normal_switches());
        assert!(iso.actions.is_empty() && iso.islands.is_empty());
    }

    #[test]
    fn leaf_dg_needs_a_single_open() {
        let mut spec = ct8_spec();
        spec.nodes[5].dg = false;
        spec.nodes[3].dg = true;
        let t = build_topology(&spec).unwrap();
        let iso = isolate_dg_islands(&t, &t.normal_switches(), &t.dg_vector()).unwrap();
        assert_eq!(iso.actions.len(), 1);
        assert_eq!(
            (iso.actions[0].edge, iso.actions[0].action),
            (e(3), Action::Open)
        );
        assert_eq!(iso.islands, vec![vec![n(4)]]);
    }

    #[test]
    fn isolation_without_a_tie_is_infeasible() {
        let mut spec = ct8_spec();
        spec.edges.remove(3); // drop the tie
        let t = build_topology(&spec).unwrap();
        let err = isolate_dg_islands(&t, &t.normal_switches(), &t.dg_vector()).unwrap_err();
        assert_eq!(err, Error::InfeasibleIsolation(n(6)));
    }

    #[test]
    fn tamper_at_five() {
        let r = run(&[5]);
        assert_eq!(r.suspect_history[0], vec![n(5), n(6), n(7)]);
        assert_eq!(r.final_suspects, vec![n(5)]);
        assert_eq!(r.final_switches.to_string(), "1111001");
        let checks: Vec<_> = r
            .checks
            .iter()
            .map(|c| (c.frtu.as_str(), c.alarm))
            .collect();
        assert_eq!(checks, vec![("FRTU_2", false), ("FRTU_1", true)]);
        assert!(!r.alarm_cleared_by_isolation);
    }

    #[test]
    fn tamper_at_six_cleared_by_isolation() {
        let r = run(&[6]);
        assert_eq!(r.final_suspects, vec![n(6)]);
        assert!(r.alarm_cleared_by_isolation);
        assert_eq!(r.checks.len(), 2);
        assert_eq!(r.queries, 1);
    }

    #[test]
    fn tamper_at_seven() {
        let r = run(&[7]);
        assert_eq!(r.final_suspects, vec![n(7)]);
        assert!(r.checks.iter().any(|c| c.frtu == "FRTU_2" && c.alarm));
    }

    #[test]
    fn two_tampers_on_one_feeder() {
        let r = run(&[5, 7]);
        assert_eq!(r.final_suspects, vec![n(5), n(7)]);
        assert!(!r.irreducible);
    }

    #[test]
    fn step_log_mirrors_the_procedure() {
        let log = run(&[5]).step_log();
        let expected = [
            "close e4 (tie)",
            "open e5",
            "open e6",
            "check FRTU_2 (clear)",
            "check FRTU_1 (alarm)",
            "verdict: node 5",
        ];
        let mut at = 0;
        for needle in expected {
            let found = log[at..]
                .find(needle)
                .unwrap_or_else(|| panic!("{needle} in\n{log}"));
            at += found + needle.len();
        }
    }

    #[test]
    fn without_dg_the_planner_bisects() {
        let mut spec = ct8_spec();
        spec.nodes[5].dg = false;
        let t = build_topology(&spec).unwrap();
        for target in 5..=7 {
            let mut oracle = IdealOracle::new(&t, [n(target)]);
            let r = localize(
                &t,
                &t.normal_switches(),
                &t.source_vector(),
                &t.dg_vector(),
                e(7),
                &mut oracle,
            )
            .unwrap();
            assert_eq!(r.final_suspects, vec![n(target)], "{:#?}", r.log);
            assert!(r.queries <= 2);
            assert!(r.constraint_violations.is_empty());
        }
    }

    #[test]
    fn non_alarming_trigger_is_inconsistent() {
        let t = ct8();
        let mut oracle = IdealOracle::new(&t, []);
        let err = localize(
            &t,
            &t.normal_switches(),
            &t.source_vector(),
            &t.dg_vector(),
            e(7),
            &mut oracle,
        )
        .unwrap_err();
        assert!(matches!(err, Error::OracleInconsistent(_)));
    }

    #[test]
    fn trigger_must_be_a_breaker() {
        let t = ct8();
        let mut oracle = IdealOracle::new(&t, [n(5)]);
        let err = localize(
            &t,
            &t.normal_switches(),
            &t.source_vector(),
            &t.dg_vector(),
            e(2),
            &mut oracle,
        )
        .unwrap_err();
        assert_eq!(err, Error::NotABreaker(e(2)));
    }

    #[test]
    fn meshed_start_is_rejected() {
        let t = ct8();
        let mut oracle = IdealOracle::new(&t, [n(5)]);
        let err = localize(
            &t,
            &SwitchVector::ones(7),
            &t.source_vector(),
            &t.dg_vector(),
            e(7),
            &mut oracle,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasiblePlan(_)));
    }

    #[test]
    fn restoration_finds_the_island() {
        let t = ct8();
        let isolated: SwitchVector = "1111001".parse().unwrap();
        let mut oracle = IdealOracle::new(&t, [n(6)]);
        let r = sequential_restoration(&t, &isolated, &[vec![n(6)]], &mut oracle).unwrap();
        assert_eq!(r.final_suspects, vec![n(6)]);
        assert_eq!(r.actions.len(), 1);
        // e5 is the lowest switch linking node 6 to a live neighbour (node 5,
        // now on feeder 1)
        assert_eq!(
            (r.actions[0].edge, r.actions[0].action),
            (e(5), Action::Close)
        );
        assert!(r.checks.iter().any(|c| c.frtu == "FRTU_1" && c.alarm));
    }

    #[test]
    fn restoration_refuses_to_start_under_alarm() {
        let t = ct8();
        let isolated: SwitchVector = "1111001".parse().unwrap();
        let mut oracle = IdealOracle::new(&t, [n(7)]);
        let err = sequential_restoration(&t, &isolated, &[vec![n(6)]], &mut oracle).unwrap_err();
        assert!(matches!(err, Error::OracleInconsistent(_)));
    }

    #[test]
    fn restoration_with_no_islands_is_empty() {
        let t = ct8();
        let mut oracle = IdealOracle::new(&t, []);
        let r = sequential_restoration(&t, &t.normal_switches(), &[], &mut oracle).unwrap();
        assert!(r.actions.is_empty() && r.checks.is_empty() && r.final_suspects.is_empty());
    }

    #[test]
    fn restoration_with_clean_islands_is_inconsistent() {
        let t = ct8();
        let isolated: SwitchVector = "1111001".parse().unwrap();
        let mut oracle = IdealOracle::new(&t, []);
        let err = sequential_restoration(&t, &isolated, &[vec![n(6)]], &mut oracle).unwrap_err();
        assert!(matches!(err, Error::OracleInconsistent(_)));
    }

    #[test]
    fn recorded_oracle_replays_answers() {
        let t = ct8();
        let mut ideal = IdealOracle::new(&t, [n(7)]);
        let mut recorded = RecordedOracle::default();
        for bits in ["1110111", "1111001"] {
            let v: SwitchVector = bits.parse().unwrap();
            recorded
                .answers
                .insert(v.clone(), ideal.alarms(&v).unwrap());
        }
        let r = localize(
            &t,
            &t.normal_switches(),
            &t.source_vector(),
            &t.dg_vector(),
            e(7),
            &mut recorded,
        )
        .unwrap();
        assert_eq!(r.final_suspects, vec![n(7)]);
    }
}
