use std::collections::VecDeque;

use gridsleuth_core::energization::{
    energize, energize_with_feeder_open, served_by_feeder, service_map,
};
use gridsleuth_core::matrix::{adjacency_from_incidence, IncidenceMatrix};
use gridsleuth_core::synth::{random_network, random_switches};
use gridsleuth_core::topology::build_topology;
use gridsleuth_core::{SourceVector, SwitchVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain breadth-first reachability over closed edges.
fn bfs(n: usize, endpoints: &[(usize, usize)], closed: &[bool], sources: &[bool]) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for (&(a, b), &c) in endpoints.iter().zip(closed) {
        if c {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = sources.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| sources[i]).collect();
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Random simple graph; cycles and isolated nodes allowed.
fn random_graph(rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize)>) {
    let n = rng.gen_range(1..=32);
    let mut edges = Vec::new();
    if n > 1 {
        for _ in 0..rng.gen_range(0..=2 * n) {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
                edges.push((a, b));
            }
        }
    }
    (n, edges)
}

fn random_bits(rng: &mut ChaCha8Rng, len: usize, p: f64) -> Vec<bool> {
    (0..len).map(|_| rng.gen_bool(p)).collect()
}

#[test]
fn fixed_point_matches_bfs_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let (n, edges) = random_graph(&mut rng);
        let closed = random_bits(&mut rng, edges.len(), 0.6);
        let sources = random_bits(&mut rng, n, 0.15);
        let m = IncidenceMatrix::from_endpoints(n, &edges).unwrap();
        let fp = energize(
            &m,
            &SwitchVector::from_bits(closed.clone()),
            &SourceVector::from_bits(sources.clone()),
        )
        .unwrap();
        if fp.energized.bits() != bfs(n, &edges, &closed, &sources).as_slice() {
            mismatches += 1;
        }
        assert!(fp.iterations <= n.max(1));
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn fixed_point_matches_bfs_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..500 {
        let t = build_topology(&random_network(&mut rng, 32, 0.2)).unwrap();
        let edges: Vec<_> = t
            .edges()
            .iter()
            .map(|e| (e.endpoints.0.zero_based(), e.endpoints.1.zero_based()))
            .collect();
        let v = random_switches(&mut rng, &t);
        let s = t.source_vector();
        let fp = energize(&t.incidence_matrix(), &v, &s).unwrap();
        assert_eq!(
            fp.energized.bits(),
            bfs(t.node_count(), &edges, v.bits(), s.bits()).as_slice()
        );
    }
}

#[test]
fn adjacency_matches_closed_endpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..300 {
        let (n, edges) = random_graph(&mut rng);
        let closed = random_bits(&mut rng, edges.len(), 0.5);
        let m = IncidenceMatrix::from_endpoints(n, &edges).unwrap();
        let adj = adjacency_from_incidence(&m, &SwitchVector::from_bits(closed.clone())).unwrap();
        let mut expected = vec![vec![false; n]; n];
        for (&(a, b), &c) in edges.iter().zip(&closed) {
            if c {
                expected[a][b] = true;
                expected[b][a] = true;
            }
        }
        for (i, row) in expected.iter().enumerate() {
            for (j, &want) in row.iter().enumerate() {
                assert_eq!(adj.connected(i, j), want, "({i},{j})");
            }
        }
        let closed_count = closed.iter().filter(|&&c| c).count();
        assert_eq!(adj.matrix().total(), 2 * closed_count);
    }
}

#[test]
fn service_map_agrees_with_feeder_opening() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let t = build_topology(&random_network(&mut rng, 24, 0.0)).unwrap();
        let v = t.normal_switches();
        let s = t.source_vector();
        let map = service_map(&t, &v, &s);
        for b in t.breakers() {
            let direct: Vec<_> = map.served_by(b.id).collect();
            assert_eq!(direct, served_by_feeder(&t, &v, &s, b.id).unwrap());
            let open = energize_with_feeder_open(&t, &v, &s, b.id).unwrap();
            assert!(direct.iter().all(|&n| !open.get(n)));
        }
    }
}

/// Node count, edges, switch states, sources.
type GraphCase = (usize, Vec<(usize, usize)>, Vec<bool>, Vec<bool>);

fn graph_case() -> impl Strategy<Value = GraphCase> {
    (2usize..=20)
        .prop_flat_map(|n| {
            let edges = prop::collection::vec((0..n, 0..n), 0..(2 * n));
            (Just(n), edges)
        })
        .prop_map(|(n, raw)| {
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for (a, b) in raw {
                if a != b && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
                    edges.push((a, b));
                }
            }
            (n, edges)
        })
        .prop_flat_map(|(n, edges)| {
            let m = edges.len();
            (
                Just(n),
                Just(edges),
                prop::collection::vec(any::<bool>(), m),
                prop::collection::vec(prop::bool::weighted(0.2), n),
            )
        })
}

proptest! {
    #[test]
    fn closing_a_switch_never_darkens_a_node(
        (n, edges, closed, sources) in graph_case(),
        pick in any::<prop::sample::Index>(),
    ) {
        prop_assume!(!edges.is_empty());
        let m = IncidenceMatrix::from_endpoints(n, &edges).unwrap();
        let s = SourceVector::from_bits(sources);
        let v = SwitchVector::from_bits(closed);
        let e = gridsleuth_core::EdgeId::from_zero_based(pick.index(edges.len()));
        let before = energize(&m, &v.with_open(e), &s).unwrap().energized;
        let after = energize(&m, &v.with_closed(e), &s).unwrap().energized;
        for (b, a) in before.bits().iter().zip(after.bits()) {
            prop_assert!(!b || *a);
        }
    }

    #[test]
    fn result_is_a_fixed_point((n, edges, closed, sources) in graph_case()) {
        let m = IncidenceMatrix::from_endpoints(n, &edges).unwrap();
        let v = SwitchVector::from_bits(closed);
        let s = SourceVector::from_bits(sources.clone());
        let fp = energize(&m, &v, &s).unwrap();
        prop_assert!(fp.iterations <= n);
        for (src, on) in sources.iter().zip(fp.energized.bits()) {
            prop_assert!(!src || *on);
        }
        let again = energize(&m, &v, &SourceVector::from_bits(fp.energized.bits().to_vec())).unwrap();
        prop_assert_eq!(again.energized, fp.energized);
    }
}
