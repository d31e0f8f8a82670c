//! C ABI over `mfrb-core`.
//!
//! Objects are opaque heap handles released with the matching `*_free`.
//! Every fallible call returns an [`MfrbStatus`]; on failure the message is
//! available from [`mfrb_last_error`] on the same thread until the next call.
//! Node ids are dense indices `0..n`; [`mfrb_graph_label`] maps them back to
//! the labels of a parsed edge list.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mfrb_core::experiment::{load_graph, partial_activate, select_rumor_seeds};
use mfrb_core::{
    evaluate_f_exact, evaluate_f_mc, revised_imm, rng, CascadeSeeds, Error, FeatureModel, Graph, NodeId,
    ProbabilityScheme, Solution, SolverParams,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MfrbStatus {
    Ok = 0,
    /// Null pointer, bad length or out-of-range argument.
    InvalidArgument = 1,
    /// Malformed edge list.
    ParseError = 2,
    /// Invalid model, budget or parameters.
    ConfigError = 3,
    IoError = 4,
    /// Instance too large for exact evaluation.
    TooLarge = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

pub struct MfrbGraph(Graph);
pub struct MfrbModel(FeatureModel);
pub struct MfrbSeeds(CascadeSeeds);
pub struct MfrbSolution(Solution);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MfrbStatus {
    match e {
        Error::Parse { .. } => MfrbStatus::ParseError,
        Error::Io { .. } => MfrbStatus::IoError,
        Error::TooLarge { .. } => MfrbStatus::TooLarge,
        _ => MfrbStatus::ConfigError,
    }
}

struct Fail(MfrbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(MfrbStatus::InvalidArgument, msg.to_string())
}

/// Run `f` behind a panic guard and translate its outcome to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MfrbStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MfrbStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            MfrbStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(invalid(&format!("{what} is null")))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn out<T>(p: *mut *mut T, value: T) -> Result<(), Fail> {
    if p.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *p = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not UTF-8")))
}

fn checked_users(users: &[u32], n: usize) -> Result<Vec<NodeId>, Fail> {
    if let Some(&u) = users.iter().find(|&&u| u as usize >= n) {
        return Err(invalid(&format!("node {u} out of range for n = {n}")));
    }
    let mut v = users.to_vec();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

/// Message of the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn mfrb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse an edge list held in `text` (NUL-terminated).
/// `text` must be a valid C string and `out_graph` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mfrb_graph_parse(text: *const c_char, out_graph: *mut *mut MfrbGraph) -> MfrbStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let (g, _) = Graph::parse_str(text)?;
        out(out_graph, MfrbGraph(g))
    })
}

/// Load an edge-list file, optionally adding every reverse edge.
/// `path` must be a valid C string and `out_graph` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mfrb_graph_load(path: *const c_char, symmetrize: bool, out_graph: *mut *mut MfrbGraph) -> MfrbStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let g = load_graph(Path::new(path), symmetrize)?;
        out(out_graph, MfrbGraph(g))
    })
}

/// Build a graph on `n` nodes from `m` edges `src[i] -> dst[i]`.
/// `src` and `dst` must point to `m` elements each.
#[no_mangle]
pub unsafe extern "C" fn mfrb_graph_from_edges(
    n: usize,
    src: *const u32,
    dst: *const u32,
    m: usize,
    out_graph: *mut *mut MfrbGraph,
) -> MfrbStatus {
    guard(|| {
        let (s, d) = (slice(src, m, "src")?, slice(dst, m, "dst")?);
        let edges: Vec<(NodeId, NodeId)> = s.iter().copied().zip(d.iter().copied()).collect();
        let (g, _) = Graph::from_edges(n, &edges).map_err(|e| Fail(MfrbStatus::InvalidArgument, e.to_string()))?;
        out(out_graph, MfrbGraph(g))
    })
}

/// `graph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfrb_graph_free(graph: *mut MfrbGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes; 0 for a null handle.
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrb_graph_node_count(graph: *const MfrbGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

/// Number of edges after self-loop and duplicate removal.
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrb_graph_edge_count(graph: *const MfrbGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.m())
}

/// Input label of `node`; `UINT64_MAX` when out of range.
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrb_graph_label(graph: *const MfrbGraph, node: u32) -> u64 {
    match graph.as_ref() {
        Some(g) if (node as usize) < g.0.n() => g.0.label(node),
        _ => u64::MAX,
    }
}

/// Feature model with `r` layers and constant per-layer probabilities.
/// `weights` and `probs` must point to `r` elements each.
#[no_mangle]
pub unsafe extern "C" fn mfrb_model_new_constant(
    weights: *const f64,
    probs: *const f64,
    r: usize,
    out_model: *mut *mut MfrbModel,
) -> MfrbStatus {
    guard(|| {
        let w = slice(weights, r, "weights")?.to_vec();
        let p = slice(probs, r, "probs")?.to_vec();
        out(out_model, MfrbModel(FeatureModel::new(w, ProbabilityScheme::Constant(p))?))
    })
}

/// Feature model with `r` layers under the weighted-cascade scheme.
/// `weights` must point to `r` elements.
#[no_mangle]
pub unsafe extern "C" fn mfrb_model_new_weighted_cascade(weights: *const f64, r: usize, out_model: *mut *mut MfrbModel) -> MfrbStatus {
    guard(|| {
        let w = slice(weights, r, "weights")?.to_vec();
        out(out_model, MfrbModel(FeatureModel::new(w, ProbabilityScheme::WeightedCascade)?))
    })
}

/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfrb_model_free(model: *mut MfrbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Write the `size` highest out-degree nodes (ties to the lowest id) to
/// `out_nodes`, which must hold `size` elements.
/// `graph` must be live and `out_nodes` writable for `size` elements.
#[no_mangle]
pub unsafe extern "C" fn mfrb_select_rumor_seeds(graph: *const MfrbGraph, size: usize, out_nodes: *mut u32) -> MfrbStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        let chosen = select_rumor_seeds(&g.0, size)?;
        if size > 0 && out_nodes.is_null() {
            return Err(invalid("out_nodes is null"));
        }
        for (i, u) in chosen.into_iter().enumerate() {
            *out_nodes.add(i) = u;
        }
        Ok(())
    })
}

/// Rumor placement where every rumor user accepts the rumor in each of the
/// model's layers independently with probability `accept`, drawn from `seed`.
/// Handles must be live; `rumor` must point to `count` elements.
#[no_mangle]
pub unsafe extern "C" fn mfrb_seeds_new(
    graph: *const MfrbGraph,
    model: *const MfrbModel,
    rumor: *const u32,
    count: usize,
    accept: f64,
    seed: u64,
    out_seeds: *mut *mut MfrbSeeds,
) -> MfrbStatus {
    guard(|| {
        let (g, fm) = (deref(graph, "graph")?, deref(model, "model")?);
        if !(0.0..=1.0).contains(&accept) {
            return Err(invalid("accept must lie in [0, 1]"));
        }
        let users = checked_users(slice(rumor, count, "rumor")?, g.0.n())?;
        let layers = partial_activate(&users, fm.0.r(), accept, &mut rng::stream(seed, 0));
        let seeds = CascadeSeeds::new(g.0.n(), users, layers, vec![])?;
        out(out_seeds, MfrbSeeds(seeds))
    })
}

/// `seeds` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfrb_seeds_free(seeds: *mut MfrbSeeds) {
    if !seeds.is_null() {
        drop(Box::from_raw(seeds));
    }
}

/// Select `k` protector seeds with Revised-IMM.
/// Handles must be live and `out_solution` valid.
#[no_mangle]
pub unsafe extern "C" fn mfrb_solve(
    graph: *const MfrbGraph,
    model: *const MfrbModel,
    seeds: *const MfrbSeeds,
    k: usize,
    eps: f64,
    ell: f64,
    seed: u64,
    out_solution: *mut *mut MfrbSolution,
) -> MfrbStatus {
    guard(|| {
        let (g, fm, s) = (deref(graph, "graph")?, deref(model, "model")?, deref(seeds, "seeds")?);
        let sol = revised_imm(&g.0, &fm.0, &s.0, &SolverParams::new(k, eps, ell), seed)?;
        out(out_solution, MfrbSolution(sol))
    })
}

/// Number of selected seeds.
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrb_solution_seed_count(solution: *const MfrbSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.0.seeds.len())
}

/// Copy up to `cap` seeds in pick order; returns the number copied.
/// `out_nodes` must be writable for `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn mfrb_solution_seeds(solution: *const MfrbSolution, out_nodes: *mut u32, cap: usize) -> usize {
    let Some(s) = solution.as_ref() else { return 0 };
    if out_nodes.is_null() {
        return 0;
    }
    let n = cap.min(s.0.seeds.len());
    ptr::copy_nonoverlapping(s.0.seeds.as_ptr(), out_nodes, n);
    n
}

/// `n * r * W`, the sampled estimate of the objective; NaN for null.
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrb_solution_estimate(solution: *const MfrbSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.scaled_estimate)
}

/// Size of the final sample pool.
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrb_solution_pool_size(solution: *const MfrbSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.0.pool_size)
}

/// Lower bound on the optimum used to size the final pool.
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mfrb_solution_lower_bound(solution: *const MfrbSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.lower_bound)
}

/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfrb_solution_free(solution: *mut MfrbSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

unsafe fn with_positive(g: &MfrbGraph, s: &MfrbSeeds, positive: *const u32, count: usize) -> Result<CascadeSeeds, Fail> {
    let users = checked_users(slice(positive, count, "positive")?, g.0.n())?;
    Ok(s.0.with_positive(users)?)
}

/// Monte-Carlo objective of the protector set `positive` over `runs`
/// simulations keyed by `seed`. `std_err` may be null.
/// Handles must be live, `positive` must point to `count` elements and
/// `mean` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfrb_evaluate_mc(
    graph: *const MfrbGraph,
    model: *const MfrbModel,
    seeds: *const MfrbSeeds,
    positive: *const u32,
    count: usize,
    runs: usize,
    seed: u64,
    mean: *mut f64,
    std_err: *mut f64,
) -> MfrbStatus {
    guard(|| {
        let (g, fm, s) = (deref(graph, "graph")?, deref(model, "model")?, deref(seeds, "seeds")?);
        if mean.is_null() {
            return Err(invalid("mean is null"));
        }
        let est = evaluate_f_mc(&g.0, &fm.0, &with_positive(g, s, positive, count)?, runs, seed)?;
        *mean = est.mean;
        if !std_err.is_null() {
            *std_err = est.std_err;
        }
        Ok(())
    })
}

/// Exact objective by enumeration; fails with `TooLarge` beyond 22 random
/// edge-layer pairs.
/// As [`mfrb_evaluate_mc`].
#[no_mangle]
pub unsafe extern "C" fn mfrb_evaluate_exact(
    graph: *const MfrbGraph,
    model: *const MfrbModel,
    seeds: *const MfrbSeeds,
    positive: *const u32,
    count: usize,
    value: *mut f64,
) -> MfrbStatus {
    guard(|| {
        let (g, fm, s) = (deref(graph, "graph")?, deref(model, "model")?, deref(seeds, "seeds")?);
        if value.is_null() {
            return Err(invalid("value is null"));
        }
        *value = evaluate_f_exact(&g.0, &fm.0, &with_positive(g, s, positive, count)?)?;
        Ok(())
    })
}
