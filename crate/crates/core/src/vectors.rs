//! Binary row vectors over the canonical edge and node orderings.
//!
//! All of them print and parse as a plain bit string (`"1110111"`); the
//! parser also accepts whitespace or commas between bits so the
//! bracketed `[1 1 1 0 1 1 1]` form can be pasted directly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::topology::{EdgeId, NodeId};

fn parse_bits(s: &str) -> Result<Vec<bool>, Error> {
    let trimmed = s.trim().trim_start_matches('[').trim_end_matches(']');
    let mut bits = Vec::with_capacity(trimmed.len());
    for c in trimmed.chars() {
        match c {
            '0' => bits.push(false),
            '1' => bits.push(true),
            c if c.is_whitespace() || c == ',' => {}
            _ => return Err(Error::InvalidBits(s.to_string())),
        }
    }
    Ok(bits)
}

macro_rules! binary_vector {
    ($(#[$meta:meta])* $name:ident, $index:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(Vec<bool>);

        impl $name {
            pub fn zeros(len: usize) -> Self {
                Self(vec![false; len])
            }

            pub fn ones(len: usize) -> Self {
                Self(vec![true; len])
            }

            pub fn from_bits(bits: Vec<bool>) -> Self {
                Self(bits)
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn get(&self, idx: $index) -> bool {
                self.0[idx.zero_based()]
            }

            pub fn set(&mut self, idx: $index, value: bool) {
                self.0[idx.zero_based()] = value;
            }

            pub fn bits(&self) -> &[bool] {
                &self.0
            }

            pub fn count_ones(&self) -> usize {
                self.0.iter().filter(|b| **b).count()
            }

            /// Positions holding a 1, in ascending order.
            pub fn ones_iter(&self) -> impl Iterator<Item = $index> + '_ {
                self.0
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| **b)
                    .map(|(i, _)| $index::from_zero_based(i))
            }

            /// Positions holding a 0, in ascending order.
            pub fn zeros_iter(&self) -> impl Iterator<Item = $index> + '_ {
                self.0
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| !**b)
                    .map(|(i, _)| $index::from_zero_based(i))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                for b in &self.0 {
                    f.write_str(if *b { "1" } else { "0" })?;
                }
                Ok(())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                parse_bits(s).map(Self)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

binary_vector!(
    /// Open/closed state of every edge; `1` is closed.
    SwitchVector,
    EdgeId
);

binary_vector!(
    /// Nodes that inject power into the grid (substation sources).
    SourceVector,
    NodeId
);

binary_vector!(
    /// Nodes that host a distributed generator.
    DgVector,
    NodeId
);

binary_vector!(
    /// Result of the energization fixed point; `1` means energized.
    EnergizationVector,
    NodeId
);

impl SwitchVector {
    /// Copy of `self` with `edge` forced open.
    pub fn with_open(&self, edge: EdgeId) -> Self {
        let mut next = self.clone();
        next.set(edge, false);
        next
    }

    pub fn with_closed(&self, edge: EdgeId) -> Self {
        let mut next = self.clone();
        next.set(edge, true);
        next
    }
}

impl EnergizationVector {
    /// Nodes left dark. These are the suspects after a feeder head is opened.
    pub fn dark_nodes(&self) -> Vec<NodeId> {
        self.zeros_iter().collect()
    }
}
