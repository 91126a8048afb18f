//! Localization of tampered smart meters on radial distribution networks.
//!
//! The pipeline runs from a switched network model ([`topology`],
//! [`matrix`], [`energization`]) through metering and FRTU discrepancy
//! alarms ([`metering`]) to a switching planner that isolates the tampered
//! node ([`planner`]) and meter-level ranking inside it ([`analytics`]).

pub mod analytics;
pub mod energization;
pub mod error;
pub mod matrix;
pub mod metering;
pub mod networks;
pub mod planner;
pub mod synth;
pub mod topology;
pub mod vectors;

pub use error::{Error, Result};
pub use topology::{EdgeId, NodeId, Topology};
pub use vectors::{DgVector, EnergizationVector, SourceVector, SwitchVector};
