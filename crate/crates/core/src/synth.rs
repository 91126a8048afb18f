//! Seeded generators for synthetic networks, used by the property suites
//! and the batch scenario tooling.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::topology::{
    EdgeKindSpec, EdgeSpec, Label, NodeKindSpec, NodeSpec, Topology, TopologySpec,
};
use crate::vectors::SwitchVector;

fn node(id: u64, source: bool, dg: bool) -> NodeSpec {
    NodeSpec {
        id: Label::Num(id),
        kind: if source {
            NodeKindSpec::Source
        } else {
            NodeKindSpec::Load
        },
        dg,
    }
}

fn push_edge(edges: &mut Vec<EdgeSpec>, kind: EdgeKindSpec, from: u64, to: u64) {
    let id = edges.len() as u64 + 1;
    edges.push(EdgeSpec {
        id: Label::Text(format!("e{id}")),
        kind,
        from: Label::Num(from),
        to: Label::Num(to),
        frtu: None,
    });
}

/// Random radial network with up to `max_nodes` nodes.
///
/// Every load hangs off a random earlier node, so the normally closed edges
/// form one tree per source. Extra normally open ties join random load pairs.
pub fn random_network<R: Rng>(rng: &mut R, max_nodes: usize, dg_prob: f64) -> TopologySpec {
    let n = rng.gen_range(2..=max_nodes.max(2)) as u64;
    let n_sources = rng.gen_range(1..=(n / 4).clamp(1, 3));
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut adjacent = std::collections::HashSet::new();
    for id in 1..=n {
        let source = id <= n_sources;
        nodes.push(node(id, source, !source && rng.gen_bool(dg_prob)));
        if !source {
            let parent = rng.gen_range(1..id);
            let kind = if parent <= n_sources {
                EdgeKindSpec::Breaker
            } else {
                EdgeKindSpec::Sectionalizer
            };
            push_edge(&mut edges, kind, parent, id);
            adjacent.insert((parent, id));
        }
    }
    let loads: Vec<u64> = (n_sources + 1..=n).collect();
    if loads.len() >= 2 {
        for _ in 0..rng.gen_range(0..=loads.len() / 2) {
            let pair: Vec<_> = loads.choose_multiple(rng, 2).copied().collect();
            let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if adjacent.insert(key) {
                push_edge(&mut edges, EdgeKindSpec::Tie, key.0, key.1);
            }
        }
    }
    TopologySpec { nodes, edges }
}

/// Feeders laid out as chains with normally open ties between their tails.
///
/// Feeder `k` is `source - breaker - l1 - l2 - ... - lm`; consecutive feeders
/// share a tie between their last loads, and sometimes a second tie between
/// random interior loads.
pub fn chain_feeders<R: Rng>(
    rng: &mut R,
    feeders: usize,
    max_len: usize,
    dg_prob: f64,
) -> TopologySpec {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut chains: Vec<Vec<u64>> = Vec::new();
    let mut next = 1u64;
    for _ in 0..feeders.max(1) {
        let source = next;
        nodes.push(node(source, true, false));
        next += 1;
        let len = rng.gen_range(2..=max_len.max(2));
        let mut chain = Vec::with_capacity(len);
        let mut prev = source;
        for k in 0..len {
            let id = next;
            next += 1;
            nodes.push(node(id, false, rng.gen_bool(dg_prob)));
            let kind = if k == 0 {
                EdgeKindSpec::Breaker
            } else {
                EdgeKindSpec::Sectionalizer
            };
            push_edge(&mut edges, kind, prev, id);
            chain.push(id);
            prev = id;
        }
        chains.push(chain);
    }
    for pair in chains.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let tail = (*a.last().unwrap(), *b.last().unwrap());
        push_edge(&mut edges, EdgeKindSpec::Tie, tail.0, tail.1);
        if rng.gen_bool(0.3) {
            let x = a[rng.gen_range(0..a.len() - 1)];
            let y = b[rng.gen_range(0..b.len() - 1)];
            push_edge(&mut edges, EdgeKindSpec::Tie, x, y);
        }
    }
    TopologySpec { nodes, edges }
}

/// Uniformly random switch states.
pub fn random_switches<R: Rng>(rng: &mut R, t: &Topology) -> SwitchVector {
    SwitchVector::from_bits((0..t.edge_count()).map(|_| rng.gen_bool(0.5)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_topology;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_networks_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            build_topology(&random_network(&mut rng, 32, 0.2)).unwrap();
            build_topology(&chain_feeders(&mut rng, 3, 6, 0.2)).unwrap();
        }
    }
}
