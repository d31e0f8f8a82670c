//! Forward simulation of two competing cascades on the feature layers, and
//! the Monte-Carlo and exact evaluators of the blocking objective.
//!
//! The objective of a positive seed set is the expected number of users that
//! end up not rumor-active. Since a user's threshold is uniform on [0, 1],
//! that probability is `sum_i w_i * (1 - r(v_i))` for each run, so the
//! threshold never has to be sampled.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{EdgeId, EdgeProbability, FeatureModel, Graph, NodeId};
use crate::rng::{self, StreamRng};
use rand::Rng;

/// Rumor seed users, the per-layer rumor-accepted subsets, and the positive
/// seed users. Positive seeds accept the positive cascade in every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeSeeds {
    rumor_users: Vec<NodeId>,
    rumor_layers: Vec<Vec<NodeId>>,
    positive_users: Vec<NodeId>,
    rumor_user_mask: Vec<bool>,
    rumor_layer_masks: Vec<Vec<bool>>,
}

fn sorted_unique(mut v: Vec<NodeId>) -> Vec<NodeId> {
    v.sort_unstable();
    v.dedup();
    v
}

fn mask(n: usize, ids: &[NodeId]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &u in ids {
        m[u as usize] = true;
    }
    m
}

impl CascadeSeeds {
    /// `n` is the node count and `rumor_layers.len()` the feature count.
    pub fn new(
        n: usize,
        rumor_users: Vec<NodeId>,
        rumor_layers: Vec<Vec<NodeId>>,
        positive_users: Vec<NodeId>,
    ) -> Result<Self> {
        let rumor_users = sorted_unique(rumor_users);
        let rumor_layers: Vec<Vec<NodeId>> = rumor_layers.into_iter().map(sorted_unique).collect();
        let positive_users = sorted_unique(positive_users);
        if let Some(&u) = rumor_users.iter().chain(&positive_users).find(|&&u| u as usize >= n) {
            return Err(Error::contract(format!("seed {u} out of range 0..{n}")));
        }
        let rumor_user_mask = mask(n, &rumor_users);
        for (i, layer) in rumor_layers.iter().enumerate() {
            if let Some(&u) = layer.iter().find(|&&u| (u as usize) >= n || !rumor_user_mask[u as usize]) {
                return Err(Error::contract(format!(
                    "user {u} accepts the rumor in layer {i} but is not a rumor seed"
                )));
            }
        }
        if let Some(&u) = positive_users.iter().find(|&&u| rumor_user_mask[u as usize]) {
            return Err(Error::contract(format!("user {u} is both a rumor and a positive seed")));
        }
        let rumor_layer_masks = rumor_layers.iter().map(|l| mask(n, l)).collect();
        Ok(CascadeSeeds {
            rumor_users,
            rumor_layers,
            positive_users,
            rumor_user_mask,
            rumor_layer_masks,
        })
    }

    /// Rumor seeds that accept the rumor in all `r` layers.
    pub fn fully_active(n: usize, r: usize, rumor_users: Vec<NodeId>, positive_users: Vec<NodeId>) -> Result<Self> {
        let layers = vec![rumor_users.clone(); r];
        Self::new(n, rumor_users, layers, positive_users)
    }

    /// Same rumor placement with a different positive seed set.
    pub fn with_positive(&self, positive_users: Vec<NodeId>) -> Result<Self> {
        let positive_users = sorted_unique(positive_users);
        let n = self.rumor_user_mask.len();
        if let Some(&u) = positive_users
            .iter()
            .find(|&&u| u as usize >= n || self.rumor_user_mask[u as usize])
        {
            return Err(Error::contract(format!("invalid positive seed {u}")));
        }
        Ok(CascadeSeeds {
            positive_users,
            ..self.clone()
        })
    }

    pub fn rumor_users(&self) -> &[NodeId] {
        &self.rumor_users
    }

    pub fn rumor_layer(&self, layer: usize) -> &[NodeId] {
        &self.rumor_layers[layer]
    }

    pub fn rumor_layer_mask(&self, layer: usize) -> &[bool] {
        &self.rumor_layer_masks[layer]
    }

    pub fn is_rumor_user(&self, u: NodeId) -> bool {
        self.rumor_user_mask[u as usize]
    }

    pub fn positive_users(&self) -> &[NodeId] {
        &self.positive_users
    }

    pub fn layers(&self) -> usize {
        self.rumor_layers.len()
    }

    pub fn n(&self) -> usize {
        self.rumor_user_mask.len()
    }
}

/// Terminal state of a feature node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    None,
    Rumor,
    Positive,
}

/// Terminal labels of one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerOutcome {
    pub status: Vec<Status>,
}

impl LayerOutcome {
    pub fn rumor_count(&self) -> usize {
        self.status.iter().filter(|&&s| s == Status::Rumor).count()
    }
}

/// Answers "is this edge live?" for one realization of one layer.
pub trait EdgeLiveness {
    fn is_live(&mut self, edge: EdgeId, prob: f64) -> bool;
}

/// Flips a coin the first time an edge is asked about and remembers it.
pub struct LazyCoins<'a, R: Rng> {
    rng: &'a mut R,
    memo: &'a mut EdgeMemo,
}

/// Per-edge memo for [`LazyCoins`], reusable across realizations.
#[derive(Clone, Debug, Default)]
pub struct EdgeMemo {
    state: Vec<u8>,
    touched: Vec<EdgeId>,
}

const UNKNOWN: u8 = 0;
const LIVE: u8 = 1;
const BLOCKED: u8 = 2;

impl EdgeMemo {
    pub fn new(m: usize) -> Self {
        EdgeMemo {
            state: vec![UNKNOWN; m],
            touched: Vec::new(),
        }
    }

    /// Grow to cover `m` edges.
    pub fn ensure(&mut self, m: usize) {
        if self.state.len() < m {
            self.state.resize(m, UNKNOWN);
        }
    }

    /// Forget all flips in O(flips).
    pub fn clear(&mut self) {
        for &e in &self.touched {
            self.state[e as usize] = UNKNOWN;
        }
        self.touched.clear();
    }

    /// Number of edges flipped since the last clear.
    pub fn flips(&self) -> usize {
        self.touched.len()
    }
}

impl<'a, R: Rng> LazyCoins<'a, R> {
    /// Starts a fresh realization: `memo` is cleared.
    pub fn new(rng: &'a mut R, memo: &'a mut EdgeMemo) -> Self {
        memo.clear();
        LazyCoins { rng, memo }
    }
}

impl<R: Rng> EdgeLiveness for LazyCoins<'_, R> {
    #[inline]
    fn is_live(&mut self, edge: EdgeId, prob: f64) -> bool {
        match self.memo.state[edge as usize] {
            LIVE => true,
            BLOCKED => false,
            _ => {
                let live = if prob >= 1.0 {
                    true
                } else if prob <= 0.0 {
                    false
                } else {
                    self.rng.random::<f64>() < prob
                };
                self.memo.state[edge as usize] = if live { LIVE } else { BLOCKED };
                self.memo.touched.push(edge);
                live
            }
        }
    }
}

/// Realization defined by a counter-based hash of `(key, edge)`: the same
/// key gives the same realization regardless of traversal order, so
/// different seed sets evaluated under one key share their coin flips.
#[derive(Clone, Copy, Debug)]
pub struct KeyedCoins {
    pub key: u64,
}

impl EdgeLiveness for KeyedCoins {
    #[inline]
    fn is_live(&mut self, edge: EdgeId, prob: f64) -> bool {
        prob >= 1.0 || (prob > 0.0 && rng::keyed_unit(self.key, u64::from(edge)) < prob)
    }
}

/// An explicit live/blocked vector indexed by edge id.
#[derive(Clone, Copy, Debug)]
pub struct FixedRealization<'a>(pub &'a [bool]);

impl EdgeLiveness for FixedRealization<'_> {
    #[inline]
    fn is_live(&mut self, edge: EdgeId, _prob: f64) -> bool {
        self.0[edge as usize]
    }
}

/// Reusable buffers for layer simulations.
#[derive(Clone, Debug, Default)]
pub struct LayerSimulator {
    status: Vec<Status>,
    frontier: Vec<NodeId>,
    next: Vec<NodeId>,
    reached: Vec<u32>,
}

impl LayerSimulator {
    /// Run the competitive cascade on one layer and return the labels.
    ///
    /// Synchronous rounds: nodes activated in round t try each outgoing edge
    /// once in round t+1. A node offered both cascades in the same round
    /// takes the rumor. Labels never change once set.
    pub fn run<L: EdgeLiveness>(
        &mut self,
        graph: &Graph,
        probs: &EdgeProbability,
        layer: usize,
        rumor_layer: &[NodeId],
        positive: &[NodeId],
        live: &mut L,
    ) -> &[Status] {
        let n = graph.n();
        self.status.clear();
        self.status.resize(n, Status::None);
        self.frontier.clear();
        for &u in rumor_layer {
            self.status[u as usize] = Status::Rumor;
        }
        for &u in positive {
            if self.status[u as usize] == Status::None {
                self.status[u as usize] = Status::Positive;
            }
        }
        self.frontier.extend(rumor_layer.iter().chain(positive));
        self.frontier.sort_unstable();
        self.frontier.dedup();

        // Nodes reached in the current round are stamped with it so a pending
        // Positive can still be overridden by a same-round Rumor offer.
        self.reached.clear();
        self.reached.resize(n, 0);
        let mut round = 0u32;
        while !self.frontier.is_empty() {
            round += 1;
            self.next.clear();
            for &u in &self.frontier {
                let cascade = self.status[u as usize];
                for (v, e) in graph.out_edges(u) {
                    let current = self.status[v as usize];
                    let contestable = current == Status::None
                        || (current == Status::Positive
                            && cascade == Status::Rumor
                            && self.reached[v as usize] == round);
                    if !contestable {
                        continue;
                    }
                    if live.is_live(e, probs.get(e, layer)) {
                        if current == Status::None {
                            self.next.push(v);
                            self.reached[v as usize] = round;
                        }
                        self.status[v as usize] = cascade;
                    }
                }
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
        }
        &self.status
    }
}

/// Competitive cascade on one layer under the realization given by `live`.
/// `layer` is 0-based.
pub fn simulate_layer<L: EdgeLiveness>(
    graph: &Graph,
    probs: &EdgeProbability,
    layer: usize,
    seeds: &CascadeSeeds,
    live: &mut L,
) -> LayerOutcome {
    let mut sim = LayerSimulator::default();
    let status = sim
        .run(graph, probs, layer, seeds.rumor_layer(layer), seeds.positive_users(), live)
        .to_vec();
    LayerOutcome { status }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub runs: usize,
}

/// Mean and standard error of the mean.
pub(crate) fn summarize(values: &[f64]) -> Estimate {
    let runs = values.len();
    let mean = values.iter().sum::<f64>() / runs as f64;
    let std_err = if runs > 1 {
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (runs - 1) as f64;
        (var / runs as f64).sqrt()
    } else {
        0.0
    };
    Estimate { mean, std_err, runs }
}

/// Realization key of layer `layer` in run `run` under evaluation seed `seed`.
#[inline]
pub fn run_key(seed: u64, run: u64, layer: usize) -> u64 {
    rng::derive(rng::derive(seed, run), layer as u64)
}

/// Weighted count of non-rumor feature nodes in one run.
fn run_value(
    sim: &mut LayerSimulator,
    graph: &Graph,
    fm: &FeatureModel,
    probs: &EdgeProbability,
    seeds: &CascadeSeeds,
    seed: u64,
    run: u64,
) -> f64 {
    let n = graph.n();
    (0..fm.r())
        .map(|layer| {
            let mut coins = KeyedCoins {
                key: run_key(seed, run, layer),
            };
            let status = sim.run(graph, probs, layer, seeds.rumor_layer(layer), seeds.positive_users(), &mut coins);
            let rumor = status.iter().filter(|&&s| s == Status::Rumor).count();
            fm.weight(layer) * (n - rumor) as f64
        })
        .sum()
}

/// Monte-Carlo estimate of the expected number of non-rumor-active users.
///
/// Run `j` uses the realization keyed by `(seed, j, layer)`, so two calls
/// with the same `seed` and different positive seeds are evaluated on the
/// same realizations.
pub fn evaluate_f_mc(
    graph: &Graph,
    fm: &FeatureModel,
    seeds: &CascadeSeeds,
    num: usize,
    seed: u64,
) -> Result<Estimate> {
    if num == 0 {
        return Err(Error::contract("simulation count must be at least 1"));
    }
    let probs = EdgeProbability::new(graph, fm);
    let values: Vec<f64> = (0..num as u64)
        .into_par_iter()
        .map_init(LayerSimulator::default, |sim, run| {
            run_value(sim, graph, fm, &probs, seeds, seed, run)
        })
        .collect();
    Ok(summarize(&values))
}

/// Live-edge bitsets of `num` runs, keyed exactly as in [`evaluate_f_mc`].
/// Evaluating many seed sets against one `Realizations` gives the same
/// numbers as calling [`evaluate_f_mc`] with the same seed each time, but
/// each coin is hashed once instead of once per seed set.
#[derive(Clone, Debug)]
pub struct Realizations {
    r: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Realizations {
    /// Memory needed for `num` runs over `m` edges and `r` layers.
    pub fn bytes_for(m: usize, r: usize, num: usize) -> usize {
        m.div_ceil(64) * 8 * r * num
    }

    pub fn new(graph: &Graph, fm: &FeatureModel, num: usize, seed: u64) -> Self {
        let (r, m) = (fm.r(), graph.m());
        let words = m.div_ceil(64);
        let probs = EdgeProbability::new(graph, fm);
        let mut bits = vec![0u64; words * r * num];
        if words > 0 {
            bits.par_chunks_mut(words).enumerate().for_each(|(slot, row)| {
                let (run, layer) = ((slot / r) as u64, slot % r);
                let mut coins = KeyedCoins {
                    key: run_key(seed, run, layer),
                };
                for e in 0..m {
                    if coins.is_live(e as EdgeId, probs.get(e as EdgeId, layer)) {
                        row[e / 64] |= 1 << (e % 64);
                    }
                }
            });
        }
        Realizations { r, words, bits }
    }

    pub fn runs(&self) -> usize {
        if self.words == 0 {
            0
        } else {
            self.bits.len() / (self.words * self.r)
        }
    }
}

struct BitRealization<'a>(&'a [u64]);

impl EdgeLiveness for BitRealization<'_> {
    #[inline]
    fn is_live(&mut self, edge: EdgeId, _prob: f64) -> bool {
        let e = edge as usize;
        (self.0[e / 64] >> (e % 64)) & 1 == 1
    }
}

/// [`evaluate_f_mc`] on precomputed realizations. Falls back to keyed coins
/// when the graph has no edges (nothing to store).
pub fn evaluate_f_on(
    graph: &Graph,
    fm: &FeatureModel,
    seeds: &CascadeSeeds,
    realized: &Realizations,
    num: usize,
    seed: u64,
) -> Result<Estimate> {
    if realized.words == 0 {
        return evaluate_f_mc(graph, fm, seeds, num, seed);
    }
    if realized.runs() != num || realized.r != fm.r() {
        return Err(Error::contract("realizations do not match the requested runs"));
    }
    let probs = EdgeProbability::new(graph, fm);
    let n = graph.n();
    let w = realized.words;
    let values: Vec<f64> = (0..num)
        .into_par_iter()
        .map_init(LayerSimulator::default, |sim, run| {
            (0..fm.r())
                .map(|layer| {
                    let slot = (run * fm.r() + layer) * w;
                    let mut live = BitRealization(&realized.bits[slot..slot + w]);
                    let status = sim.run(graph, &probs, layer, seeds.rumor_layer(layer), seeds.positive_users(), &mut live);
                    let rumor = status.iter().filter(|&&s| s == Status::Rumor).count();
                    fm.weight(layer) * (n - rumor) as f64
                })
                .sum::<f64>()
        })
        .collect();
    Ok(summarize(&values))
}

/// Upper limit on `r * m` for [`evaluate_f_exact`].
pub const EXACT_LIMIT: usize = 22;

/// Exact objective by enumerating every live-edge realization of every
/// layer. Edges with probability 0 or 1 are not enumerated.
pub fn evaluate_f_exact(graph: &Graph, fm: &FeatureModel, seeds: &CascadeSeeds) -> Result<f64> {
    let size = fm.r() * graph.m();
    if size > EXACT_LIMIT {
        return Err(Error::TooLarge {
            size,
            limit: EXACT_LIMIT,
        });
    }
    let probs = EdgeProbability::new(graph, fm);
    let n = graph.n();
    let mut sim = LayerSimulator::default();
    let mut total = 0.0;
    for layer in 0..fm.r() {
        let mut live = vec![false; graph.m()];
        let mut uncertain = Vec::new();
        for e in 0..graph.m() as EdgeId {
            let p = probs.get(e, layer);
            if p >= 1.0 {
                live[e as usize] = true;
            } else if p > 0.0 {
                uncertain.push((e, p));
            }
        }
        let mut expected = 0.0;
        for bits in 0u64..(1u64 << uncertain.len()) {
            let mut pr = 1.0;
            for (j, &(e, p)) in uncertain.iter().enumerate() {
                let on = bits >> j & 1 == 1;
                live[e as usize] = on;
                pr *= if on { p } else { 1.0 - p };
            }
            let status = sim.run(
                graph,
                &probs,
                layer,
                seeds.rumor_layer(layer),
                seeds.positive_users(),
                &mut FixedRealization(&live),
            );
            let rumor = status.iter().filter(|&&s| s == Status::Rumor).count();
            expected += pr * (n - rumor) as f64;
        }
        total += fm.weight(layer) * expected;
    }
    Ok(total)
}

/// Whether a user with per-feature acceptance `accepted` and threshold
/// `theta` is activated: `sum_i w_i * x_i >= theta`.
pub fn user_activation(fm: &FeatureModel, accepted: &[bool], theta: f64) -> bool {
    debug_assert!((0.0..=1.0).contains(&theta));
    let score: f64 = fm
        .weights()
        .iter()
        .zip(accepted)
        .filter(|(_, &x)| x)
        .map(|(w, _)| w)
        .sum();
    score >= theta
}

/// Stream-driven simulation: every layer of one run drawn from `rng`.
pub fn simulate_run(
    graph: &Graph,
    fm: &FeatureModel,
    seeds: &CascadeSeeds,
    rng: &mut StreamRng,
) -> Vec<LayerOutcome> {
    let probs = EdgeProbability::new(graph, fm);
    let mut memo = EdgeMemo::new(graph.m());
    (0..fm.r())
        .map(|layer| {
            let mut coins = LazyCoins::new(rng, &mut memo);
            simulate_layer(graph, &probs, layer, seeds, &mut coins)
        })
        .collect()
}
