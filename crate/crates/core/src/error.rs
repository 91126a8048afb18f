use thiserror::Error;

use crate::topology::{EdgeId, NodeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate {what} id `{id}`")]
    DuplicateId { what: &'static str, id: String },

    #[error("self-loop: edge {edge} connects node `{node}` to itself")]
    SelfLoop { edge: String, node: String },

    #[error("edge {edge} references unknown node `{endpoint}`")]
    DanglingEndpoint { edge: String, endpoint: String },

    #[error("edges {edge} and {other} join the same pair of nodes")]
    ParallelEdge { edge: String, other: String },

    #[error("normal switch state is not radial: {0}")]
    NonRadialNormalState(String),

    #[error("feeder breaker {edge} must touch exactly one substation source")]
    BreakerNotAtSource { edge: String },

    #[error("node `{node}`: {reason}")]
    InvalidRole { node: String, reason: &'static str },

    #[error("edge {edge} carries an FRTU but is not a feeder breaker")]
    FrtuNotOnBreaker { edge: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid binary vector `{0}`")]
    InvalidBits(String),

    #[error("edge {0} is not a feeder breaker")]
    NotABreaker(EdgeId),

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("unknown FRTU `{0}`")]
    UnknownFrtu(String),

    #[error("invalid switch vector: {0}")]
    InvalidSwitchVector(String),

    #[error("FRTU `{frtu}` reads zero while its meters report {reported} kWh")]
    ZeroAggregateWithNonzeroReports { frtu: String, reported: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("DG node {0} cannot be isolated without de-energizing another load")]
    InfeasibleIsolation(NodeId),

    #[error("no feasible switching plan: {0}")]
    InfeasiblePlan(String),

    #[error("inconsistent oracle answers: {0}")]
    OracleInconsistent(String),

    #[error("anomalous count {anomalous} exceeds total count {total}")]
    CountOutOfRange { anomalous: u64, total: u64 },

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("meter `{0}` has no historical readings")]
    EmptyHistory(String),

    #[error("meter `{meter}` is not attached to node {node}")]
    MeterNotOnNode { meter: String, node: NodeId },

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

impl Error {
    /// True for errors that describe a structurally invalid network or
    /// operating state, as opposed to unreadable input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            Error::DuplicateId { .. }
                | Error::SelfLoop { .. }
                | Error::DanglingEndpoint { .. }
                | Error::ParallelEdge { .. }
                | Error::NonRadialNormalState(_)
                | Error::BreakerNotAtSource { .. }
                | Error::InvalidRole { .. }
                | Error::FrtuNotOnBreaker { .. }
        )
    }
}
