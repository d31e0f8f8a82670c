//! Rumor-aware reverse sampling on the virtual multi-layer graph.
//!
//! A sample is rooted at a uniformly drawn feature node `(v, layer)`. The
//! reverse BFS collects, level by level, the users whose positive seeding
//! would reach `v` strictly before the rumor does in that realization. The
//! level on which a rumor node first appears is not collected, since the
//! rumor wins ties. If the search runs dry without meeting the rumor, the
//! root is safe in that realization and the sample is a *full* sample that
//! any non-empty seed set covers.

use std::io::{self, Read, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::diffusion::{CascadeSeeds, EdgeLiveness, EdgeMemo, LazyCoins};
use crate::error::{Error, Result};
use crate::graph::{EdgeProbability, FeatureModel, Graph, NodeId};
use crate::rng::{self, StreamRng};

/// One reverse sample.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSample {
    /// 0-based feature index of the root.
    pub layer: u16,
    pub weight: f64,
    /// Sorted protecting users; empty when `is_full`.
    pub users: Vec<NodeId>,
    /// The search never met the rumor: covered by every non-empty seed set.
    pub is_full: bool,
}

impl MultiSample {
    /// True when `positive` (sorted) covers this sample.
    pub fn covers(&self, positive: &[NodeId]) -> bool {
        if self.is_full {
            return !positive.is_empty();
        }
        // Both sides are sorted; walk the shorter one.
        if positive.len() < self.users.len() {
            positive.iter().any(|u| self.users.binary_search(u).is_ok())
        } else {
            self.users.iter().any(|u| positive.binary_search(u).is_ok())
        }
    }
}

/// `1` if `positive` covers `sample`, else `0`.
pub fn covers(sample: &MultiSample, positive: &[NodeId]) -> u8 {
    let mut sorted = positive.to_vec();
    sorted.sort_unstable();
    u8::from(sample.covers(&sorted))
}

/// Reusable traversal buffers.
#[derive(Clone, Debug)]
pub struct ReverseSearch {
    stamp: Vec<u32>,
    epoch: u32,
    frontier: Vec<NodeId>,
    next: Vec<NodeId>,
    collected: Vec<NodeId>,
    memo: EdgeMemo,
}

impl ReverseSearch {
    pub fn new(graph: &Graph) -> Self {
        ReverseSearch {
            stamp: vec![0; graph.n()],
            epoch: 0,
            frontier: Vec::new(),
            next: Vec::new(),
            collected: Vec::new(),
            memo: EdgeMemo::new(graph.m()),
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Level-synchronous reverse search from `root` in `layer` under the
    /// realization answered by `live`. `rumor_mask` marks the users whose
    /// feature node in this layer accepts the rumor.
    #[allow(clippy::too_many_arguments)]
    pub fn r_sampling<L: EdgeLiveness>(
        &mut self,
        graph: &Graph,
        probs: &EdgeProbability,
        layer: usize,
        weight: f64,
        root: NodeId,
        rumor_mask: &[bool],
        live: &mut L,
    ) -> MultiSample {
        if self.stamp.len() < graph.n() {
            self.stamp.resize(graph.n(), 0);
        }
        self.next_epoch();
        self.collected.clear();
        self.frontier.clear();
        self.frontier.push(root);
        self.stamp[root as usize] = self.epoch;
        let layer_tag = layer as u16;
        loop {
            if self.frontier.is_empty() {
                return MultiSample {
                    layer: layer_tag,
                    weight,
                    users: Vec::new(),
                    is_full: true,
                };
            }
            if self.frontier.iter().any(|&u| rumor_mask[u as usize]) {
                let mut users = self.collected.clone();
                users.sort_unstable();
                return MultiSample {
                    layer: layer_tag,
                    weight,
                    users,
                    is_full: false,
                };
            }
            self.collected.extend_from_slice(&self.frontier);
            self.next.clear();
            for &u in &self.frontier {
                for (t, e) in graph.in_edges(u) {
                    // Stamped nodes are already collected or queued; their
                    // edge is never flipped.
                    if self.stamp[t as usize] != self.epoch && live.is_live(e, probs.get(e, layer)) {
                        self.stamp[t as usize] = self.epoch;
                        self.next.push(t);
                    }
                }
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
        }
    }
}

/// Graph, model and rumor placement shared by every sample of a pool.
pub struct SamplingContext<'a> {
    pub graph: &'a Graph,
    pub fm: &'a FeatureModel,
    pub seeds: &'a CascadeSeeds,
    pub probs: EdgeProbability,
}

impl<'a> SamplingContext<'a> {
    pub fn new(graph: &'a Graph, fm: &'a FeatureModel, seeds: &'a CascadeSeeds) -> Result<Self> {
        if seeds.layers() != fm.r() || seeds.n() != graph.n() {
            return Err(Error::contract(format!(
                "seeds describe {} layers over {} nodes; model has {} layers over {} nodes",
                seeds.layers(),
                seeds.n(),
                fm.r(),
                graph.n()
            )));
        }
        if graph.n() == 0 {
            return Err(Error::contract("cannot sample an empty graph"));
        }
        Ok(SamplingContext {
            graph,
            fm,
            seeds,
            probs: EdgeProbability::new(graph, fm),
        })
    }

    /// Uniform root in `layer`, lazily realized edges, reverse search.
    pub fn single_sampling<R: Rng>(&self, search: &mut ReverseSearch, layer: usize, rng: &mut R) -> MultiSample {
        let root = rng.random_range(0..self.graph.n() as NodeId);
        self.sample_at(search, layer, root, rng)
    }

    /// Uniform feature node over all `n * r`, then as [`Self::single_sampling`].
    pub fn multi_sampling<R: Rng>(&self, search: &mut ReverseSearch, rng: &mut R) -> MultiSample {
        let n = self.graph.n() as u64;
        let idx = rng.random_range(0..n * self.fm.r() as u64);
        let layer = (idx / n) as usize;
        let root = (idx % n) as NodeId;
        self.sample_at(search, layer, root, rng)
    }

    fn sample_at<R: Rng>(&self, search: &mut ReverseSearch, layer: usize, root: NodeId, rng: &mut R) -> MultiSample {
        let mut memo = std::mem::take(&mut search.memo);
        memo.ensure(self.graph.m());
        let sample = {
            let mut coins = LazyCoins::new(rng, &mut memo);
            search.r_sampling(
                self.graph,
                &self.probs,
                layer,
                self.fm.weight(layer),
                root,
                self.seeds.rumor_layer_mask(layer),
                &mut coins,
            )
        };
        search.memo = memo;
        sample
    }

    /// Grow `pool` to `target` samples. Sample `j` is drawn from stream
    /// `(seed, j)`, so the pool content does not depend on thread count.
    pub fn extend_pool(&self, pool: &mut SamplePool, target: usize, seed: u64) {
        const CHUNK: usize = 1 << 14;
        while pool.len() < target {
            let start = pool.len();
            let end = target.min(start + CHUNK);
            let fresh: Vec<MultiSample> = (start..end)
                .into_par_iter()
                .map_init(
                    || ReverseSearch::new(self.graph),
                    |search, j| {
                        let mut rng: StreamRng = rng::stream(seed, j as u64);
                        self.multi_sampling(search, &mut rng)
                    },
                )
                .collect();
            for s in fresh {
                pool.push(s);
            }
        }
    }

    /// A new pool of exactly `count` samples.
    pub fn generate_pool(&self, count: usize, seed: u64) -> SamplePool {
        let mut pool = SamplePool::new(self.graph.n(), self.fm.r());
        self.extend_pool(&mut pool, count, seed);
        pool
    }
}

/// Ordered samples with an inverted index from user to sample positions.
#[derive(Clone, Debug)]
pub struct SamplePool {
    samples: Vec<MultiSample>,
    index: Vec<Vec<u32>>,
    full: Vec<u32>,
    layer_counts: Vec<usize>,
}

impl SamplePool {
    pub fn new(n: usize, r: usize) -> Self {
        SamplePool {
            samples: Vec::new(),
            index: vec![Vec::new(); n],
            full: Vec::new(),
            layer_counts: vec![0; r],
        }
    }

    pub fn push(&mut self, sample: MultiSample) {
        let pos = self.samples.len() as u32;
        if sample.is_full {
            self.full.push(pos);
        }
        for &u in &sample.users {
            self.index[u as usize].push(pos);
        }
        self.layer_counts[sample.layer as usize] += 1;
        self.samples.push(sample);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[MultiSample] {
        &self.samples
    }

    /// Number of users the index covers.
    pub fn n(&self) -> usize {
        self.index.len()
    }

    /// Positions of the non-full samples containing `u`.
    pub fn containing(&self, u: NodeId) -> &[u32] {
        &self.index[u as usize]
    }

    /// Positions of the full samples.
    pub fn full_samples(&self) -> &[u32] {
        &self.full
    }

    /// Samples rooted in `layer`.
    pub fn layer_count(&self, layer: usize) -> usize {
        self.layer_counts[layer]
    }

    pub fn layers(&self) -> usize {
        self.layer_counts.len()
    }

    /// Total size of the stored user lists.
    pub fn total_users(&self) -> usize {
        self.samples.iter().map(|s| s.users.len()).sum()
    }

    /// Per-sample `weight * covered` for `positive`.
    pub fn coverage_values(&self, positive: &[NodeId]) -> Vec<f64> {
        let mut covered = vec![false; self.len()];
        for &u in positive {
            for &j in self.containing(u) {
                covered[j as usize] = true;
            }
        }
        if !positive.is_empty() {
            for &j in &self.full {
                covered[j as usize] = true;
            }
        }
        self.samples
            .iter()
            .zip(covered)
            .map(|(s, c)| if c { s.weight } else { 0.0 })
            .collect()
    }

    /// Weighted fraction of samples covered by `positive`.
    pub fn estimate_w(&self, positive: &[NodeId]) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::contract("empty sample pool"));
        }
        let total: f64 = self.coverage_values(positive).iter().sum();
        Ok(total / self.len() as f64)
    }

    /// Write the debugging dump: `u64` sample count, then per sample the
    /// layer (`u16`), full flag (`u8`), user count (`u32`) and sorted `u32`
    /// user ids. Little-endian.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for s in &self.samples {
            out.write_all(&s.layer.to_le_bytes())?;
            out.write_all(&[u8::from(s.is_full)])?;
            out.write_all(&(s.users.len() as u32).to_le_bytes())?;
            for &u in &s.users {
                out.write_all(&u.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Read a dump written by [`Self::write_dump`]; weights come from `fm`.
    pub fn read_dump<R: Read>(mut input: R, n: usize, fm: &FeatureModel) -> io::Result<SamplePool> {
        fn bytes<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)?;
            Ok(b)
        }
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let count = u64::from_le_bytes(bytes(&mut input)?);
        let mut pool = SamplePool::new(n, fm.r());
        for _ in 0..count {
            let layer = u16::from_le_bytes(bytes(&mut input)?);
            let is_full = bytes::<1, _>(&mut input)?[0] != 0;
            let len = u32::from_le_bytes(bytes(&mut input)?);
            if layer as usize >= fm.r() {
                return Err(bad("layer out of range"));
            }
            let mut users = Vec::with_capacity(len as usize);
            for _ in 0..len {
                let u = u32::from_le_bytes(bytes(&mut input)?);
                if u as usize >= n {
                    return Err(bad("user id out of range"));
                }
                users.push(u);
            }
            pool.push(MultiSample {
                layer,
                weight: fm.weight(layer as usize),
                users,
                is_full,
            });
        }
        Ok(pool)
    }
}

/// Weighted coverage estimate of `positive` over `pool`.
pub fn estimate_w(pool: &SamplePool, positive: &[NodeId]) -> Result<f64> {
    pool.estimate_w(positive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::FixedRealization;
    use crate::graph::ProbabilityScheme;
    use std::collections::BTreeMap;

    const A: NodeId = 0;
    const B: NodeId = 1;
    const C: NodeId = 2;
    const D: NodeId = 3;

    fn path4() -> Graph {
        Graph::from_edges(4, &[(A, B), (B, C), (C, D)]).unwrap().0
    }

    fn cp(w: Vec<f64>, p: Vec<f64>) -> FeatureModel {
        FeatureModel::new(w, ProbabilityScheme::Constant(p)).unwrap()
    }

    fn sample(users: &[NodeId], layer: u16, weight: f64) -> MultiSample {
        MultiSample {
            layer,
            weight,
            users: users.to_vec(),
            is_full: false,
        }
    }

    #[test]
    fn r_sampling_traces() {
        let g = path4();
        let fm = cp(vec![1.0], vec![0.5]);
        let probs = EdgeProbability::new(&g, &fm);
        let rumor = [true, false, false, false];
        // a->b and b->c live, c->d blocked.
        let live = [true, true, false];
        let mut search = ReverseSearch::new(&g);
        let s = search.r_sampling(&g, &probs, 0, 1.0, C, &rumor, &mut FixedRealization(&live));
        assert_eq!((s.users.clone(), s.is_full), (vec![B, C], false));
        let s = search.r_sampling(&g, &probs, 0, 1.0, D, &rumor, &mut FixedRealization(&live));
        assert!(s.is_full && s.users.is_empty());
        let s = search.r_sampling(&g, &probs, 0, 1.0, A, &rumor, &mut FixedRealization(&live));
        assert!(!s.is_full && s.users.is_empty());
    }

    #[test]
    fn single_sampling_edge_cases() {
        let g = Graph::from_edges(1, &[]).unwrap().0;
        let fm = cp(vec![1.0], vec![0.5]);
        let seeds = CascadeSeeds::fully_active(1, 1, vec![0], vec![]).unwrap();
        let ctx = SamplingContext::new(&g, &fm, &seeds).unwrap();
        let mut search = ReverseSearch::new(&g);
        let mut rng = rng::stream(3, 0);
        for _ in 0..20 {
            let s = ctx.single_sampling(&mut search, 0, &mut rng);
            assert!(!s.is_full && s.users.is_empty());
        }

        // All probabilities zero: the root is never reached, so full.
        let g = path4();
        let fm = cp(vec![1.0], vec![0.0]);
        let seeds = CascadeSeeds::fully_active(4, 1, vec![A], vec![]).unwrap();
        let ctx = SamplingContext::new(&g, &fm, &seeds).unwrap();
        for _ in 0..50 {
            let s = ctx.single_sampling(&mut search, 0, &mut rng);
            assert!(s.is_full || s.users.is_empty());
        }
    }

    #[test]
    fn multi_sampling_on_two_layer_path() {
        let g = path4();
        let fm = cp(vec![0.4, 0.6], vec![1.0, 0.0]);
        let seeds = CascadeSeeds::fully_active(4, 2, vec![A], vec![]).unwrap();
        let ctx = SamplingContext::new(&g, &fm, &seeds).unwrap();
        let pool = ctx.generate_pool(400, 11);
        let mut seen = BTreeMap::new();
        for s in pool.samples() {
            *seen.entry((s.layer, s.is_full, s.users.clone())).or_insert(0) += 1;
        }
        // Layer 0 (p = 1): roots a, b, c, d give {}, {b}, {b,c}, {b,c,d}.
        // Layer 1 (p = 0): root a gives {}, every other root is full.
        let expected: Vec<(u16, bool, Vec<NodeId>)> = vec![
            (0, false, vec![]),
            (0, false, vec![B]),
            (0, false, vec![B, C]),
            (0, false, vec![B, C, D]),
            (1, false, vec![]),
            (1, true, vec![]),
        ];
        assert_eq!(seen.keys().cloned().collect::<Vec<_>>(), expected);
        assert_eq!(pool.layer_count(0) + pool.layer_count(1), 400);
        // Every non-trivial sample contains b: seeding b covers all but the
        // two empty kinds.
        let w = pool.estimate_w(&[B]).unwrap();
        assert!((4.0 * 2.0 * w - 3.0).abs() < 0.6);
    }

    #[test]
    fn covers_examples() {
        let s = sample(&[B, C], 0, 1.0);
        assert_eq!(covers(&s, &[C]), 1);
        assert_eq!(covers(&s, &[D]), 0);
        let full = MultiSample {
            is_full: true,
            ..sample(&[], 0, 1.0)
        };
        assert_eq!(covers(&full, &[D]), 1);
        assert_eq!(covers(&full, &[]), 0);
    }

    fn small_pool() -> SamplePool {
        let mut pool = SamplePool::new(4, 2);
        pool.push(sample(&[B, C], 0, 0.4));
        pool.push(sample(&[C], 1, 0.6));
        pool.push(sample(&[D], 0, 0.4));
        pool
    }

    #[test]
    fn estimate_w_examples() {
        let pool = small_pool();
        assert!((pool.estimate_w(&[C]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pool.estimate_w(&[]).unwrap(), 0.0);
        assert!((pool.estimate_w(&[A, B, C, D]).unwrap() - 1.4 / 3.0).abs() < 1e-15);
        assert!(SamplePool::new(3, 1).estimate_w(&[0]).is_err());
        assert_eq!(pool.layer_count(0), 2);
        assert_eq!(pool.containing(C), &[0, 1]);
    }

    #[test]
    fn layer_frequencies_are_uniform() {
        let (g, _) = Graph::parse_str("0 1\n1 2\n2 0\n2 3\n").unwrap();
        let fm = cp(vec![0.2, 0.3, 0.5], vec![0.5, 0.5, 0.5]);
        let seeds = CascadeSeeds::fully_active(4, 3, vec![0], vec![]).unwrap();
        let ctx = SamplingContext::new(&g, &fm, &seeds).unwrap();
        let theta = 30_000;
        let pool = ctx.generate_pool(theta, 5);
        let p = 1.0 / 3.0;
        let sd = (theta as f64 * p * (1.0 - p)).sqrt();
        for layer in 0..3 {
            let dev = (pool.layer_count(layer) as f64 - theta as f64 * p).abs();
            assert!(dev <= 3.0 * sd, "layer {layer}: deviation {dev} > 3 sd {sd}");
        }
    }

    #[test]
    fn pools_are_reproducible_and_dump_round_trips() {
        let (g, _) = Graph::parse_str("0 1\n1 2\n2 0\n2 3\n3 4\n4 1\n").unwrap();
        let fm = cp(vec![0.5, 0.5], vec![0.6, 0.3]);
        let seeds = CascadeSeeds::new(5, vec![0, 3], vec![vec![0], vec![0, 3]], vec![]).unwrap();
        let ctx = SamplingContext::new(&g, &fm, &seeds).unwrap();
        let a = ctx.generate_pool(5000, 77);
        let mut b = SamplePool::new(5, 2);
        ctx.extend_pool(&mut b, 1234, 77);
        ctx.extend_pool(&mut b, 5000, 77);
        assert_eq!(a.samples(), b.samples());

        let mut buf = Vec::new();
        a.write_dump(&mut buf).unwrap();
        let back = SamplePool::read_dump(&buf[..], 5, &fm).unwrap();
        assert_eq!(back.samples(), a.samples());
        assert!(SamplePool::read_dump(&buf[..buf.len() - 1], 5, &fm).is_err());
    }
}
