//! Customer consumption, smart-meter reports and FRTU feeder-head
//! aggregates, plus the feeder-level discrepancy trigger.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energization::service_map;
use crate::error::{Error, Result};
use crate::topology::{closed_components, EdgeId, Label, NodeId, Topology};
use crate::vectors::SwitchVector;

/// Discrepancy ratio above which an FRTU raises a tamper alarm.
pub const DEFAULT_THRESHOLD: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TamperMode {
    #[default]
    None,
    /// Report `alpha × true`. Below 1 hides consumption, above 1 inflates it.
    Scale { alpha: f64 },
    /// Report a constant regardless of consumption.
    Fixed { kwh: f64 },
    /// No report at all.
    Outage,
}

impl TamperMode {
    fn validate(&self, meter: &str) -> Result<()> {
        let bad = match *self {
            TamperMode::Scale { alpha } => !(alpha.is_finite() && alpha >= 0.0),
            TamperMode::Fixed { kwh } => !(kwh.is_finite() && kwh >= 0.0),
            TamperMode::None | TamperMode::Outage => false,
        };
        if bad {
            return Err(Error::InvalidParameter(format!(
                "meter `{meter}`: bad tamper {self:?}"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, true_kwh: f64) -> Option<f64> {
        match *self {
            TamperMode::None => Some(true_kwh),
            TamperMode::Scale { alpha } => Some(alpha * true_kwh),
            TamperMode::Fixed { kwh } => Some(kwh),
            TamperMode::Outage => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, TamperMode::None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomerMeter {
    pub meter_id: String,
    pub node: NodeId,
    /// kWh per interval before noise.
    pub base_load: f64,
    pub tamper: TamperMode,
    /// Probability that the tamper is active in a given interval.
    pub tamper_duty: f64,
    /// First interval in which the tamper can be active.
    pub tamper_start: u64,
}

impl CustomerMeter {
    pub fn new(meter_id: impl Into<String>, node: NodeId, base_load: f64) -> Self {
        Self {
            meter_id: meter_id.into(),
            node,
            base_load,
            tamper: TamperMode::None,
            tamper_duty: 1.0,
            tamper_start: 0,
        }
    }

    pub fn tampered(mut self, tamper: TamperMode) -> Self {
        self.tamper = tamper;
        self
    }

    fn validate(&self, t: &Topology) -> Result<()> {
        if !t.contains_node(self.node) {
            return Err(Error::UnknownNode(self.node.to_string()));
        }
        if !t.node(self.node).is_load() {
            return Err(Error::UnknownNode(format!(
                "{} (not a load node)",
                self.node
            )));
        }
        if !(self.base_load.is_finite() && self.base_load >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "meter `{}`: base_load {} must be nonnegative",
                self.meter_id, self.base_load
            )));
        }
        if !(0.0..=1.0).contains(&self.tamper_duty) {
            return Err(Error::InvalidParameter(format!(
                "meter `{}`: tamper duty {} outside [0, 1]",
                self.meter_id, self.tamper_duty
            )));
        }
        self.tamper.validate(&self.meter_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Multiplicative uniform noise half-width: factor drawn from `[1-η, 1+η]`.
    pub noise: f64,
    /// Technical losses seen by the FRTU on top of customer consumption.
    pub loss_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            noise: 0.0,
            loss_factor: 0.0,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidParameter(format!(
                "noise {} outside [0, 1]",
                self.noise
            )));
        }
        if !(self.loss_factor.is_finite() && self.loss_factor >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "loss_factor {} must be nonnegative",
                self.loss_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeterReading {
    pub meter_id: String,
    pub node: NodeId,
    pub true_kwh: f64,
    /// Absent for outage meters.
    pub reported_kwh: Option<f64>,
    /// FRTU whose feeder currently supplies this meter.
    pub frtu: Option<String>,
    pub tamper_active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrtuReading {
    pub name: String,
    pub breaker: EdgeId,
    pub aggregate_kwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeterInterval {
    pub interval_index: u64,
    pub readings: Vec<MeterReading>,
    pub frtus: Vec<FrtuReading>,
}

/// One line of the interval CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub interval: u64,
    pub meter_id: String,
    pub node: NodeId,
    pub true_kwh: f64,
    pub reported_kwh: Option<f64>,
    pub frtu: Option<String>,
    pub frtu_kwh: Option<f64>,
}

impl MeterInterval {
    pub fn frtu(&self, name: &str) -> Option<&FrtuReading> {
        self.frtus.iter().find(|f| f.name == name)
    }

    pub fn reported_total(&self, frtu: &str) -> f64 {
        self.readings
            .iter()
            .filter(|r| r.frtu.as_deref() == Some(frtu))
            .filter_map(|r| r.reported_kwh)
            .sum()
    }

    pub fn outage_meters(&self) -> impl Iterator<Item = &MeterReading> {
        self.readings.iter().filter(|r| r.reported_kwh.is_none())
    }

    pub fn rows(&self) -> Vec<IntervalRow> {
        self.readings
            .iter()
            .map(|r| IntervalRow {
                interval: self.interval_index,
                meter_id: r.meter_id.clone(),
                node: r.node,
                true_kwh: r.true_kwh,
                reported_kwh: r.reported_kwh,
                frtu: r.frtu.clone(),
                frtu_kwh: r
                    .frtu
                    .as_deref()
                    .and_then(|f| self.frtu(f))
                    .map(|f| f.aggregate_kwh),
            })
            .collect()
    }
}

/// Simulate one billing interval under switch state `switches`.
///
/// Loads fed from a substation or inside a DG island consume
/// `base_load × noise`; other dark loads consume nothing. Each FRTU
/// aggregates the true consumption of the meters its feeder supplies.
/// Output is a pure function of the inputs: the RNG is keyed by `seed`
/// with `interval_index` as the stream.
pub fn simulate_interval(
    t: &Topology,
    switches: &SwitchVector,
    meters: &[CustomerMeter],
    config: &SimConfig,
    seed: u64,
    interval_index: u64,
) -> Result<MeterInterval> {
    if switches.len() != t.edge_count() {
        return Err(Error::InvalidSwitchVector(format!(
            "{} entries for {} edges",
            switches.len(),
            t.edge_count()
        )));
    }
    config.validate()?;
    for m in meters {
        m.validate(t)?;
    }

    let service = service_map(t, switches, &t.source_vector());
    let island: HashSet<NodeId> = closed_components(t, switches)
        .into_iter()
        .filter(|c| {
            c.iter().all(|&n| !t.node(n).is_source()) && c.iter().any(|&n| t.node(n).role.has_dg)
        })
        .flatten()
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(interval_index);

    let mut readings = Vec::with_capacity(meters.len());
    for m in meters {
        // two draws per meter regardless of configuration keeps streams aligned
        let u_noise: f64 = rng.gen();
        let u_duty: f64 = rng.gen();
        let supplied = service.is_energized(m.node) || island.contains(&m.node);
        let true_kwh = if supplied {
            m.base_load * (1.0 + config.noise * (2.0 * u_noise - 1.0))
        } else {
            0.0
        };
        let tamper_active =
            !m.tamper.is_none() && interval_index >= m.tamper_start && u_duty < m.tamper_duty;
        let reported_kwh = if tamper_active {
            m.tamper.apply(true_kwh)
        } else {
            Some(true_kwh)
        };
        let frtu = service
            .feeder_of(m.node)
            .and_then(|b| t.frtu_name(b))
            .map(str::to_string);
        readings.push(MeterReading {
            meter_id: m.meter_id.clone(),
            node: m.node,
            true_kwh,
            reported_kwh,
            frtu,
            tamper_active,
        });
    }

    let frtus = t
        .breakers()
        .map(|b| {
            let name = b.frtu.clone().unwrap_or_default();
            let consumed: f64 = readings
                .iter()
                .filter(|r| r.frtu.as_deref() == Some(name.as_str()))
                .map(|r| r.true_kwh)
                .sum();
            FrtuReading {
                name,
                breaker: b.id,
                aggregate_kwh: consumed * (1.0 + config.loss_factor),
            }
        })
        .collect();

    Ok(MeterInterval {
        interval_index,
        readings,
        frtus,
    })
}

/// `|aggregate − Σ reported| / aggregate` for one FRTU.
pub fn feeder_discrepancy(interval: &MeterInterval, frtu: &str) -> Result<f64> {
    let aggregate = interval
        .frtu(frtu)
        .ok_or_else(|| Error::UnknownFrtu(frtu.to_string()))?
        .aggregate_kwh;
    let reported = interval.reported_total(frtu);
    if aggregate == 0.0 {
        if reported == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::ZeroAggregateWithNonzeroReports {
            frtu: frtu.to_string(),
            reported,
        });
    }
    Ok((aggregate - reported).abs() / aggregate)
}

/// Alarm iff the discrepancy strictly exceeds the threshold.
pub fn detect(ratio: f64, threshold: f64) -> bool {
    ratio > threshold
}

/// Alarm state of every FRTU in the interval, keyed by breaker. Meters
/// reporting consumption on a feeder whose FRTU reads zero count as an alarm.
pub fn frtu_alarms(interval: &MeterInterval, threshold: f64) -> Result<BTreeMap<EdgeId, bool>> {
    interval
        .frtus
        .iter()
        .map(|f| {
            let alarm = match feeder_discrepancy(interval, &f.name) {
                Ok(ratio) => detect(ratio, threshold),
                Err(Error::ZeroAggregateWithNonzeroReports { .. }) => true,
                Err(e) => return Err(e),
            };
            Ok((f.breaker, alarm))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scenario files

fn one() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TamperSpec {
    #[serde(flatten)]
    pub mode: TamperMode,
    #[serde(default = "one")]
    pub duty: f64,
    #[serde(default)]
    pub start: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterSpec {
    pub id: String,
    pub node: Label,
    pub base_load: f64,
    #[serde(default)]
    pub tamper: TamperSpec,
}

/// Scenario file: meters and simulation settings, plus optional fields used
/// by localization runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub meters: Vec<MeterSpec>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub loss_factor: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Initial switch state; the normal state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switches: Option<SwitchVector>,
    /// Expected tampered nodes. Taken from the tampered meters when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<Label>>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        if !(s.threshold.is_finite() && s.threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold {} must be > 0",
                s.threshold
            )));
        }
        Ok(s)
    }

    pub fn config(&self) -> SimConfig {
        SimConfig {
            noise: self.noise,
            loss_factor: self.loss_factor,
        }
    }

    fn resolve_node(t: &Topology, label: &Label) -> Result<NodeId> {
        t.node_by_label(&label.to_string())
            .ok_or_else(|| Error::UnknownNode(label.to_string()))
    }

    pub fn meters(&self, t: &Topology) -> Result<Vec<CustomerMeter>> {
        self.meters
            .iter()
            .map(|m| {
                let meter = CustomerMeter {
                    meter_id: m.id.clone(),
                    node: Self::resolve_node(t, &m.node)?,
                    base_load: m.base_load,
                    tamper: m.tamper.mode,
                    tamper_duty: m.tamper.duty,
                    tamper_start: m.tamper.start,
                };
                meter.validate(t)?;
                Ok(meter)
            })
            .collect()
    }

    pub fn initial_switches(&self, t: &Topology) -> Result<SwitchVector> {
        match &self.switches {
            Some(v) if v.len() != t.edge_count() => Err(Error::InvalidSwitchVector(format!(
                "{} entries for {} edges",
                v.len(),
                t.edge_count()
            ))),
            Some(v) => Ok(v.clone()),
            None => Ok(t.normal_switches()),
        }
    }

    pub fn tampered_nodes(&self, t: &Topology) -> Result<Vec<NodeId>> {
        let mut nodes = match &self.ground_truth {
            Some(labels) => labels
                .iter()
                .map(|l| Self::resolve_node(t, l))
                .collect::<Result<Vec<_>>>()?,
            None => self
                .meters(t)?
                .into_iter()
                .filter(|m| !m.tamper.is_none())
                .map(|m| m.node)
                .collect(),
        };
        nodes.sort();
        nodes.dedup();
        Ok(nodes)
    }
}
