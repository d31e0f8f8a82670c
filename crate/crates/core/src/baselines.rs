//! Reference seed selectors: Monte-Carlo greedy, rumor proximity, random.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::diffusion::{evaluate_f_mc, evaluate_f_on, CascadeSeeds, Realizations};
use crate::error::{Error, Result};
use crate::graph::{FeatureModel, Graph, NodeId};
use crate::rng;

fn check_budget(graph: &Graph, seeds: &CascadeSeeds, k: usize) -> Result<()> {
    let available = graph.n() - seeds.rumor_users().len();
    if k == 0 || k > available {
        return Err(Error::InfeasibleBudget { k, available });
    }
    Ok(())
}

/// Largest per-round realization cache greedy will allocate.
const REALIZATION_BUDGET: usize = 256 << 20;

/// Greedy picks with the elapsed time after each round.
#[derive(Clone, Debug)]
pub struct GreedyTrace {
    pub seeds: Vec<NodeId>,
    /// Monte-Carlo objective after each pick.
    pub values: Vec<f64>,
    /// Cumulative wall time after each pick.
    pub elapsed: Vec<Duration>,
}

/// Greedy on Monte-Carlo marginal gains. Every candidate of a round is
/// evaluated on the same `num` realizations (common random numbers);
/// ties go to the lowest id. Round `t` of a run with budget `k` is identical
/// to round `t` of any run with a larger budget.
pub fn greedy_mc_trace(
    graph: &Graph,
    fm: &FeatureModel,
    seeds: &CascadeSeeds,
    k: usize,
    num: usize,
    seed: u64,
) -> Result<GreedyTrace> {
    check_budget(graph, seeds, k)?;
    let start = Instant::now();
    let mut chosen: Vec<NodeId> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut elapsed = Vec::with_capacity(k);
    for round in 0..k {
        let round_seed = rng::derive(seed, round as u64);
        let realized = (Realizations::bytes_for(graph.m(), fm.r(), num) <= REALIZATION_BUDGET)
            .then(|| Realizations::new(graph, fm, num, round_seed));
        let candidates: Vec<NodeId> = (0..graph.n() as NodeId)
            .filter(|&u| !seeds.is_rumor_user(u) && !chosen.contains(&u))
            .collect();
        let scores = candidates
            .par_iter()
            .map(|&u| {
                let mut trial = chosen.clone();
                trial.push(u);
                let s = seeds.with_positive(trial)?;
                let est = match &realized {
                    Some(set) => evaluate_f_on(graph, fm, &s, set, num, round_seed)?,
                    None => evaluate_f_mc(graph, fm, &s, num, round_seed)?,
                };
                Ok(est.mean)
            })
            .collect::<Result<Vec<f64>>>()?;
        // The base value f(chosen) is shared by every candidate, so the
        // largest f(chosen + u) is the largest marginal gain.
        let (best, value) = candidates
            .iter()
            .zip(&scores)
            .fold(None::<(NodeId, f64)>, |acc, (&u, &v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((u, v)),
            })
            .expect("budget check leaves a candidate");
        chosen.push(best);
        values.push(value);
        elapsed.push(start.elapsed());
    }
    Ok(GreedyTrace {
        seeds: chosen,
        values,
        elapsed,
    })
}

/// Monte-Carlo greedy seed set of size `k`.
pub fn greedy_mc(
    graph: &Graph,
    fm: &FeatureModel,
    seeds: &CascadeSeeds,
    k: usize,
    num: usize,
    seed: u64,
) -> Result<Vec<NodeId>> {
    Ok(greedy_mc_trace(graph, fm, seeds, k, num, seed)?.seeds)
}

/// Users ordered by out-degree (descending), then id.
fn by_out_degree(graph: &Graph, users: &mut [NodeId]) {
    users.sort_by_key(|&u| (std::cmp::Reverse(graph.out_degree(u)), u));
}

/// Out-neighbors of the rumor seeds, highest out-degree first; topped up
/// with the highest out-degree remaining users when there are fewer than
/// `k` of them.
pub fn proximity(graph: &Graph, seeds: &CascadeSeeds, k: usize) -> Result<Vec<NodeId>> {
    check_budget(graph, seeds, k)?;
    let mut near = vec![false; graph.n()];
    for &u in seeds.rumor_users() {
        for (v, _) in graph.out_edges(u) {
            near[v as usize] = !seeds.is_rumor_user(v);
        }
    }
    let mut candidates: Vec<NodeId> = (0..graph.n() as NodeId).filter(|&u| near[u as usize]).collect();
    by_out_degree(graph, &mut candidates);
    candidates.truncate(k);
    if candidates.len() < k {
        let mut rest: Vec<NodeId> = (0..graph.n() as NodeId)
            .filter(|&u| !near[u as usize] && !seeds.is_rumor_user(u))
            .collect();
        by_out_degree(graph, &mut rest);
        candidates.extend(rest.into_iter().take(k - candidates.len()));
    }
    Ok(candidates)
}

/// `k` users drawn uniformly without replacement from the non-rumor users.
pub fn random_baseline<R: Rng + ?Sized>(graph: &Graph, seeds: &CascadeSeeds, k: usize, rng: &mut R) -> Result<Vec<NodeId>> {
    check_budget(graph, seeds, k)?;
    let pool: Vec<NodeId> = (0..graph.n() as NodeId).filter(|&u| !seeds.is_rumor_user(u)).collect();
    Ok(rand::seq::index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}
