//! Seeded synthetic graphs for tests, benchmarks and demos.

use rand::Rng;

use crate::graph::{Graph, NodeId};
use crate::rng;

/// Directed preferential attachment. Each new node `v` picks `m` distinct
/// earlier nodes with probability proportional to degree + 1; every pick
/// adds `t -> v`, and `v -> t` with probability `back`.
pub fn preferential_attachment(n: usize, m: usize, back: f64, seed: u64) -> Graph {
    let mut rng = rng::stream(seed, 0);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    // Each node appears once per incident edge plus once for itself.
    let mut urn: Vec<NodeId> = Vec::new();
    for v in 0..n as NodeId {
        let mut picked: Vec<NodeId> = Vec::with_capacity(m);
        let want = m.min(v as usize);
        while picked.len() < want {
            let t = urn[rng.random_range(0..urn.len())];
            if !picked.contains(&t) {
                picked.push(t);
            }
        }
        for &t in &picked {
            edges.push((t, v));
            urn.extend([t, v]);
            if rng.random_bool(back) {
                edges.push((v, t));
                urn.extend([t, v]);
            }
        }
        urn.push(v);
    }
    Graph::from_edges(n, &edges).expect("generated ids are in range").0
}

/// Erdős–Rényi style directed graph with each ordered pair present
/// independently with probability `p`.
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = rng::stream(seed, 1);
    let mut edges = Vec::new();
    for u in 0..n as NodeId {
        for v in 0..n as NodeId {
            if u != v && rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("generated ids are in range").0
}
