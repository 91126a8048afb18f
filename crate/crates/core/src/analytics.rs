//! Meter-level scoring inside a localized node.
//!
//! Each meter gets an anomaly score `S_a = N_a / N_r` (anomalous over total
//! readings in the window) and an alarm probability
//! `P_a = 1 − Π(1 − Q_m)` over the per-type alarm frequencies. Meters are
//! ranked by `S_a × P_a`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metering::IntervalRow;
use crate::topology::NodeId;

pub const DEFAULT_DEVIATION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnomalyScore {
    pub value: f64,
    pub n_anomalous: u64,
    pub n_total: u64,
}

/// `n_anomalous / n_total`; a meter with no readings scores 0.
pub fn anomaly_score(n_anomalous: u64, n_total: u64) -> Result<AnomalyScore> {
    if n_anomalous > n_total {
        return Err(Error::CountOutOfRange {
            anomalous: n_anomalous,
            total: n_total,
        });
    }
    let value = if n_total == 0 {
        0.0
    } else {
        n_anomalous as f64 / n_total as f64
    };
    Ok(AnomalyScore {
        value,
        n_anomalous,
        n_total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlarmProbability {
    pub value: f64,
    pub components: Vec<f64>,
}

/// Probability that at least one alarm type fires, types independent.
pub fn alarm_probability(qs: &[f64]) -> Result<AlarmProbability> {
    if let Some(&q) = qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::ProbabilityOutOfRange(q));
    }
    // p ← p + q(1 − p) equals 1 − Π(1 − q) and is exact for a single term
    let value = qs.iter().fold(0.0, |p, &q| p + q * (1.0 - p));
    Ok(AlarmProbability {
        value: value.clamp(0.0, 1.0),
        components: qs.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionProfile {
    pub meter_id: String,
    pub historical: Vec<f64>,
    pub current: Vec<f64>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

/// Count current intervals deviating from the historical median by more
/// than `deviation` as a fraction of that median.
pub fn flag_profile(p: &ConsumptionProfile, deviation: f64) -> Result<u64> {
    if p.historical.is_empty() {
        return Err(Error::EmptyHistory(p.meter_id.clone()));
    }
    if deviation.is_nan() || deviation <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "deviation threshold {deviation} must be > 0"
        )));
    }
    if p.historical
        .iter()
        .chain(&p.current)
        .any(|v| v.is_nan() || *v < 0.0)
    {
        return Err(Error::InvalidParameter(format!(
            "meter `{}`: readings must be nonnegative",
            p.meter_id
        )));
    }
    let m = median(&p.historical);
    let deviates = |x: f64| {
        if m == 0.0 {
            x != 0.0
        } else {
            (x - m).abs() / m > deviation
        }
    };
    Ok(p.current.iter().filter(|&&x| deviates(x)).count() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeterScore {
    pub meter_id: String,
    pub node: NodeId,
    pub s_a: f64,
    pub p_a: f64,
}

impl MeterScore {
    pub fn index(&self) -> f64 {
        self.s_a * self.p_a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedMeter {
    pub meter_id: String,
    pub node: NodeId,
    pub s_a: f64,
    pub p_a: f64,
    pub index: f64,
    pub rank: usize,
}

/// Order meters of `node` by `S_a × P_a`, highest first, ties by id.
pub fn rank_meters(node: NodeId, scores: &[MeterScore]) -> Result<Vec<RankedMeter>> {
    if let Some(m) = scores.iter().find(|m| m.node != node) {
        return Err(Error::MeterNotOnNode {
            meter: m.meter_id.clone(),
            node,
        });
    }
    let mut sorted: Vec<&MeterScore> = scores.iter().collect();
    sorted.sort_by(|a, b| {
        b.index()
            .total_cmp(&a.index())
            .then_with(|| a.meter_id.cmp(&b.meter_id))
    });
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, m)| RankedMeter {
            meter_id: m.meter_id.clone(),
            node: m.node,
            s_a: m.s_a,
            p_a: m.p_a,
            index: m.index(),
            rank: i + 1,
        })
        .collect())
}

/// Score every meter of `node` from an interval history.
///
/// Intervals before `baseline` form the reference profile; the rest are the
/// scoring window. Two alarm types are counted per window reading: a
/// deviation from the profile and a missing report. Their empirical
/// frequencies are the `Q_m`.
pub fn score_history(
    rows: &[IntervalRow],
    node: NodeId,
    baseline: u64,
    deviation: f64,
) -> Result<Vec<RankedMeter>> {
    #[derive(Default)]
    struct Acc {
        historical: Vec<f64>,
        current: Vec<f64>,
        window: u64,
        missing: u64,
    }
    let mut per_meter: BTreeMap<&str, Acc> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.node == node) {
        let acc = per_meter.entry(&r.meter_id).or_default();
        if r.interval < baseline {
            acc.historical.extend(r.reported_kwh);
        } else {
            acc.window += 1;
            match r.reported_kwh {
                Some(v) => acc.current.push(v),
                None => acc.missing += 1,
            }
        }
    }

    let mut scores = Vec::with_capacity(per_meter.len());
    for (id, acc) in per_meter {
        let profile = ConsumptionProfile {
            meter_id: id.to_string(),
            historical: acc.historical,
            current: acc.current,
        };
        let deviating = flag_profile(&profile, deviation)?;
        let s_a = anomaly_score(deviating + acc.missing, acc.window)?;
        let freq = |k: u64| {
            if acc.window == 0 {
                0.0
            } else {
                k as f64 / acc.window as f64
            }
        };
        let p_a = alarm_probability(&[freq(deviating), freq(acc.missing)])?;
        scores.push(MeterScore {
            meter_id: id.to_string(),
            node,
            s_a: s_a.value,
            p_a: p_a.value,
        });
    }
    rank_meters(node, &scores)
}
