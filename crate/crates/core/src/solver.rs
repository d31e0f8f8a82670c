//! Revised-IMM: greedy weighted max-coverage over a sample pool, sized by a
//! statistical lower bound on the optimum.
//!
//! The sampling phase halves a guess `x_i` of the optimum until the greedy
//! coverage of a growing working pool clears `(1 + eps') * x_i`, turns the
//! result into a lower bound `LB`, and then draws a *fresh* pool of
//! `ceil(lambda* / LB)` samples. Selecting on the fresh pool rather than the
//! working pool keeps the final pool independent of the stopping decision.
//!
//! The `log(C(n - n_r, k) / delta)` terms are read as
//! `log C(n - n_r, k) + log(1 / delta)`.

use std::time::{Duration, Instant};

use crate::diffusion::CascadeSeeds;
use crate::error::{Error, Result};
use crate::graph::{FeatureModel, Graph, NodeId};
use crate::rng;
use crate::sampler::{SamplePool, SamplingContext};

pub const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / std::f64::consts::E;
const TWO_MINUS_INV_E: f64 = 2.0 - 1.0 / std::f64::consts::E;

/// Below this `min(b, a - b)` the log-binomial is summed term by term.
const DIRECT_SUM_LIMIT: u64 = 100_000;

/// Natural log of the binomial coefficient `C(a, b)`.
pub fn log_binomial(a: u64, b: u64) -> Result<f64> {
    if b > a {
        return Err(Error::contract(format!("log_binomial({a}, {b}): b > a")));
    }
    let b = b.min(a - b);
    if b == 0 {
        return Ok(0.0);
    }
    if b <= DIRECT_SUM_LIMIT {
        // C(a, b) = prod_{j=1..b} (a - b + j) / j = prod (1 + (a - b) / j)
        let d = (a - b) as f64;
        return Ok((1..=b).map(|j| (d / j as f64).ln_1p()).sum());
    }
    let lg = |x: u64| libm::lgamma(x as f64 + 1.0);
    Ok(lg(a) - lg(b) - lg(a - b))
}

/// Working-pool constant `lambda'`.
pub fn compute_lambda_prime(
    n: usize,
    r: usize,
    w_bar: f64,
    eps_prime: f64,
    k: usize,
    n_r: usize,
    delta3: f64,
) -> Result<f64> {
    let nr = (n * r) as f64;
    let log_term = log_binomial((n - n_r) as u64, k as u64)? + (1.0 / delta3).ln();
    Ok(nr * (2.0 * w_bar + 2.0 / 3.0 * eps_prime) * log_term / (eps_prime * eps_prime))
}

/// Final-pool constant `lambda*`; the final pool has `lambda* / LB` samples.
pub fn compute_lambda_star(
    n: usize,
    r: usize,
    w_bar: f64,
    eps: f64,
    k: usize,
    n_r: usize,
    ell: f64,
) -> Result<f64> {
    let nr = (n * r) as f64;
    let log_term = log_binomial((n - n_r) as u64, k as u64)? + 2f64.ln() + ell * (n as f64).ln();
    Ok(2.0 * nr * w_bar * TWO_MINUS_INV_E * (TWO_MINUS_INV_E + eps / (3.0 * w_bar)) * log_term / (eps * eps))
}

/// Sample count that makes the greedy coverage a `(1-1/e)(1-eps1)`
/// approximation of OPT with probability `1 - delta1`.
pub fn theta_1(n: usize, r: usize, w_bar: f64, eps1: f64, delta1: f64, opt: f64) -> f64 {
    2.0 * (n * r) as f64 * w_bar * (1.0 / delta1).ln() / (eps1 * eps1 * opt)
}

/// Sample count that bounds the overestimate of the greedy solution by
/// `eps2 * OPT` with probability `1 - delta2`.
#[allow(clippy::too_many_arguments)]
pub fn theta_2(n: usize, r: usize, w_bar: f64, eps2: f64, delta2: f64, k: usize, n_r: usize, opt: f64) -> Result<f64> {
    let log_term = log_binomial((n - n_r) as u64, k as u64)? + (1.0 / delta2).ln();
    Ok((2.0 * w_bar + 2.0 / 3.0 * eps2) * (n * r) as f64 * log_term / (eps2 * eps2 * opt))
}

/// User-facing solver parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub k: usize,
    pub eps: f64,
    pub ell: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            k: 1,
            eps: 0.1,
            ell: 1.0,
        }
    }
}

/// Quantities derived from [`SolverParams`] and the instance size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedParams {
    pub eps_prime: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub n_r: usize,
}

impl SolverParams {
    pub fn new(k: usize, eps: f64, ell: f64) -> Self {
        SolverParams { k, eps, ell }
    }

    /// Check the parameters against an instance with `n` users, `n_r` of
    /// them rumor seeds.
    pub fn validate(&self, n: usize, n_r: usize) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::contract(format!("eps = {} must lie in (0, 1)", self.eps)));
        }
        if !(self.ell > 0.0) {
            return Err(Error::contract(format!("ell = {} must be positive", self.ell)));
        }
        let available = n.saturating_sub(n_r);
        if self.k == 0 || self.k > available {
            return Err(Error::InfeasibleBudget { k: self.k, available });
        }
        Ok(())
    }

    pub fn derive(&self, n: usize, r: usize, n_r: usize) -> DerivedParams {
        let nf = n as f64;
        let eps12 = self.eps / TWO_MINUS_INV_E;
        // log2(nr) < 1 only when nr = 1, where the search loop never runs.
        let log2_nr = ((n * r) as f64).log2().max(1.0);
        DerivedParams {
            eps_prime: std::f64::consts::SQRT_2 * self.eps,
            eps1: eps12,
            eps2: eps12,
            delta1: 1.0 / (2.0 * nf.powf(self.ell)),
            delta2: 1.0 / (2.0 * nf.powf(self.ell)),
            delta3: 1.0 / (nf.powf(self.ell) * log2_nr),
            n_r,
        }
    }
}

/// Greedy selection result.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Chosen users in pick order.
    pub seeds: Vec<NodeId>,
    /// Weighted covered fraction of the pool.
    pub w: f64,
}

/// Greedy weighted maximum coverage: `k` picks, each the allowed user with
/// the largest covered weight among still-uncovered samples. Ties go to the
/// lowest id. `forbidden[u]` excludes `u`.
pub fn node_selection(pool: &SamplePool, k: usize, forbidden: &[bool]) -> Result<Selection> {
    if pool.is_empty() {
        return Err(Error::contract("node selection on an empty pool"));
    }
    let n = pool.n();
    let available = (0..n).filter(|&u| !forbidden[u]).count();
    if k > available {
        return Err(Error::InfeasibleBudget { k, available });
    }
    let r = pool.layers();
    let mut layer_weight = vec![0.0; r];
    for s in pool.samples() {
        layer_weight[s.layer as usize] = s.weight;
    }

    // Per-user, per-layer counts of uncovered non-full samples. Gains are
    // recomputed from integer counts so equal counts give equal gains.
    let mut counts = vec![0u32; n * r];
    for s in pool.samples() {
        for &u in &s.users {
            counts[u as usize * r + s.layer as usize] += 1;
        }
    }
    let gain = |counts: &[u32], u: usize| -> f64 {
        counts[u * r..(u + 1) * r]
            .iter()
            .zip(&layer_weight)
            .map(|(&c, &w)| c as f64 * w)
            .sum()
    };

    let mut covered = vec![false; pool.len()];
    let mut covered_per_layer = vec![0u64; r];
    let mut chosen = vec![false; n];
    let mut seeds = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for u in 0..n {
            if forbidden[u] || chosen[u] {
                continue;
            }
            let g = gain(&counts, u);
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((u, g));
            }
        }
        let (u, _) = best.expect("k <= available users");
        chosen[u] = true;
        seeds.push(u as NodeId);
        if seeds.len() == 1 {
            for &j in pool.full_samples() {
                covered[j as usize] = true;
                covered_per_layer[pool.samples()[j as usize].layer as usize] += 1;
            }
        }
        for &j in pool.containing(u as NodeId) {
            if covered[j as usize] {
                continue;
            }
            covered[j as usize] = true;
            let s = &pool.samples()[j as usize];
            covered_per_layer[s.layer as usize] += 1;
            for &v in &s.users {
                counts[v as usize * r + s.layer as usize] -= 1;
            }
        }
    }
    let total: f64 = covered_per_layer
        .iter()
        .zip(&layer_weight)
        .map(|(&c, &w)| c as f64 * w)
        .sum();
    Ok(Selection {
        seeds,
        w: total / pool.len() as f64,
    })
}

/// Result of the sampling phase.
#[derive(Clone, Debug)]
pub struct SamplingOutcome {
    /// The fresh pool handed to the final selection.
    pub pool: SamplePool,
    pub lower_bound: f64,
    /// Working pool size after each search iteration.
    pub working_sizes: Vec<usize>,
    /// Number of search iterations run.
    pub iterations: usize,
    /// False when no iteration cleared its test and `LB` fell back to `k`.
    pub bound_found: bool,
}

/// Number of lower-bound search iterations: `ceil(log2(nr)) - 1`.
pub fn search_iterations(nr: usize) -> usize {
    if nr <= 1 {
        0
    } else {
        (usize::BITS - (nr - 1).leading_zeros()) as usize - 1
    }
}

/// Lower-bound search on a working pool, then a fresh final pool.
pub fn sampling_phase(ctx: &SamplingContext<'_>, params: &SolverParams, seed: u64) -> Result<SamplingOutcome> {
    let n = ctx.graph.n();
    let r = ctx.fm.r();
    let n_r = ctx.seeds.rumor_users().len();
    params.validate(n, n_r)?;
    let d = params.derive(n, r, n_r);
    let w_bar = ctx.fm.w_bar();
    let lambda_prime = compute_lambda_prime(n, r, w_bar, d.eps_prime, params.k, n_r, d.delta3)?;
    let lambda_star = compute_lambda_star(n, r, w_bar, params.eps, params.k, n_r, params.ell)?;
    let forbidden: Vec<bool> = (0..n as NodeId).map(|u| ctx.seeds.is_rumor_user(u)).collect();

    let nr = (n * r) as f64;
    let working_seed = rng::derive_label(seed, "working-pool");
    let mut working = SamplePool::new(n, r);
    let mut lower_bound = None;
    let mut working_sizes = Vec::new();
    for i in 1..=search_iterations(n * r) {
        let x = nr / 2f64.powi(i as i32);
        let theta_i = (lambda_prime / x).ceil() as usize;
        ctx.extend_pool(&mut working, theta_i.max(1), working_seed);
        working_sizes.push(working.len());
        let sel = node_selection(&working, params.k, &forbidden)?;
        if nr * sel.w >= (1.0 + d.eps_prime) * x {
            lower_bound = Some(nr * sel.w / (1.0 + d.eps_prime));
            break;
        }
    }
    let bound_found = lower_bound.is_some();
    // Every positive seed is itself safe, so OPT >= k.
    let lower_bound = lower_bound.unwrap_or(params.k as f64);
    let theta = ((lambda_star / lower_bound).ceil() as usize).max(1);
    let pool = ctx.generate_pool(theta, rng::derive_label(seed, "final-pool"));
    Ok(SamplingOutcome {
        pool,
        lower_bound,
        iterations: working_sizes.len(),
        working_sizes,
        bound_found,
    })
}

/// Wall-clock split of a solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub sampling: Duration,
    pub selection: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.sampling + self.selection
    }
}

/// Output of [`revised_imm`].
#[derive(Clone, Debug)]
pub struct Solution {
    /// Positive seeds in pick order.
    pub seeds: Vec<NodeId>,
    /// Weighted covered fraction of the final pool.
    pub w_estimate: f64,
    /// `n * r * w_estimate`, the estimate of the objective.
    pub scaled_estimate: f64,
    pub pool_size: usize,
    pub lower_bound: f64,
    pub working_pool_size: usize,
    pub bound_found: bool,
    pub timings: Timings,
}

impl Solution {
    /// Equality of everything except timings.
    pub fn same_result(&self, other: &Solution) -> bool {
        self.seeds == other.seeds
            && self.w_estimate.to_bits() == other.w_estimate.to_bits()
            && self.scaled_estimate.to_bits() == other.scaled_estimate.to_bits()
            && self.pool_size == other.pool_size
            && self.lower_bound.to_bits() == other.lower_bound.to_bits()
            && self.working_pool_size == other.working_pool_size
    }
}

/// Select `params.k` positive seeds against the rumor placement in `seeds`
/// (its positive users are ignored). Deterministic in `seed`.
pub fn revised_imm(
    graph: &Graph,
    fm: &FeatureModel,
    seeds: &CascadeSeeds,
    params: &SolverParams,
    seed: u64,
) -> Result<Solution> {
    let ctx = SamplingContext::new(graph, fm, seeds)?;
    let start = Instant::now();
    let outcome = sampling_phase(&ctx, params, seed)?;
    let sampling = start.elapsed();

    let start = Instant::now();
    let forbidden: Vec<bool> = (0..graph.n() as NodeId).map(|u| seeds.is_rumor_user(u)).collect();
    let sel = node_selection(&outcome.pool, params.k, &forbidden)?;
    let selection = start.elapsed();

    let nr = (graph.n() * fm.r()) as f64;
    Ok(Solution {
        seeds: sel.seeds,
        w_estimate: sel.w,
        scaled_estimate: nr * sel.w,
        pool_size: outcome.pool.len(),
        lower_bound: outcome.lower_bound,
        working_pool_size: outcome.working_sizes.last().copied().unwrap_or(0),
        bound_found: outcome.bound_found,
        timings: Timings { sampling, selection },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::MultiSample;

    fn sample(users: &[NodeId], layer: u16, weight: f64) -> MultiSample {
        MultiSample {
            layer,
            weight,
            users: users.to_vec(),
            is_full: false,
        }
    }

    fn small_pool() -> SamplePool {
        let mut pool = SamplePool::new(4, 2);
        pool.push(sample(&[1, 2], 0, 0.4));
        pool.push(sample(&[2], 1, 0.6));
        pool.push(sample(&[3], 0, 0.4));
        pool
    }

    #[test]
    fn log_binomial_examples() {
        assert!((log_binomial(10, 3).unwrap() - 120f64.ln()).abs() < 1e-12);
        assert_eq!(log_binomial(17, 0).unwrap(), 0.0);
        assert_eq!(log_binomial(17, 17).unwrap(), 0.0);
        assert!(log_binomial(3, 4).is_err());
    }

    #[test]
    fn log_binomial_branches_agree() {
        // Just above the direct-sum limit both formulas are valid.
        let a = 3 * DIRECT_SUM_LIMIT;
        let b = DIRECT_SUM_LIMIT;
        let direct: f64 = (1..=b).map(|j| (((a - b) as f64) / j as f64).ln_1p()).sum();
        // C(a, b + 1) = C(a, b) * (a - b) / (b + 1)
        let via_gamma = log_binomial(a, b + 1).unwrap() - (((a - b) as f64) / (b + 1) as f64).ln();
        assert!((direct - via_gamma).abs() / direct < 1e-11);
    }

    #[test]
    fn node_selection_examples() {
        let pool = small_pool();
        let forbidden = [true, false, false, false];
        let one = node_selection(&pool, 1, &forbidden).unwrap();
        assert_eq!(one.seeds, vec![2]);
        assert!((one.w - 1.0 / 3.0).abs() < 1e-15);
        let two = node_selection(&pool, 2, &forbidden).unwrap();
        assert_eq!(two.seeds, vec![2, 3]);
        assert!((two.w - 1.4 / 3.0).abs() < 1e-15);
        assert!(matches!(
            node_selection(&pool, 4, &forbidden),
            Err(Error::InfeasibleBudget { k: 4, available: 3 })
        ));
    }

    #[test]
    fn node_selection_all_full() {
        let mut pool = SamplePool::new(5, 1);
        for _ in 0..4 {
            pool.push(MultiSample {
                is_full: true,
                ..sample(&[], 0, 1.0)
            });
        }
        let sel = node_selection(&pool, 1, &[true, false, false, false, false]).unwrap();
        assert_eq!(sel.seeds, vec![1]);
        assert_eq!(sel.w, 1.0);
        // Zero-gain picks still fill the budget in id order.
        let sel = node_selection(&pool, 3, &[true, false, false, false, false]).unwrap();
        assert_eq!(sel.seeds, vec![1, 2, 3]);
    }

    #[test]
    fn iteration_count() {
        assert_eq!(search_iterations(1), 0);
        assert_eq!(search_iterations(2), 0);
        assert_eq!(search_iterations(3), 1);
        assert_eq!(search_iterations(8), 2);
        assert_eq!(search_iterations(800), 9);
        assert_eq!(search_iterations(1024), 9);
    }

    #[test]
    fn derived_params() {
        let d = SolverParams::new(5, 0.1, 1.0).derive(400, 2, 20);
        assert!((d.eps_prime - 0.1 * 2f64.sqrt()).abs() < 1e-15);
        assert!((d.eps1 - 0.1 / (2.0 - (-1f64).exp())).abs() < 1e-15);
        assert_eq!(d.delta1, 1.0 / 800.0);
        assert!((d.delta3 - 1.0 / (400.0 * 800f64.log2())).abs() < 1e-18);
        // eps2 = eps - (1 - 1/e) eps1
        assert!((d.eps2 - (0.1 - ONE_MINUS_INV_E * d.eps1)).abs() < 1e-15);
    }

    #[test]
    fn param_validation() {
        let p = SolverParams::new(3, 0.1, 1.0);
        assert!(p.validate(10, 7).is_ok());
        assert!(p.validate(10, 8).is_err());
        assert!(SolverParams::new(0, 0.1, 1.0).validate(10, 0).is_err());
        assert!(SolverParams::new(1, 1.0, 1.0).validate(10, 0).is_err());
        assert!(SolverParams::new(1, 0.1, 0.0).validate(10, 0).is_err());
    }
}
