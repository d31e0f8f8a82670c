//! Multi-feature rumor blocking.
//!
//! A network is modeled as `r` independent-cascade layers over one topology.
//! A rumor and a protective cascade compete in every layer; the goal is to
//! choose `k` protector seeds that maximize the weighted expected number of
//! users the rumor never reaches. The crate provides forward simulation
//! (Monte-Carlo and exact), reverse multi-layer sampling, the Revised-IMM
//! solver, reference baselines and the experiment driver behind `mfrb`.

// Negated float comparisons are deliberate: NaN must fail range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod rng;
pub mod sampler;
pub mod solver;
pub mod synthetic;

pub use diffusion::{evaluate_f_exact, evaluate_f_mc, CascadeSeeds, Estimate};
pub use error::{Error, Result};
pub use graph::{EdgeId, FeatureModel, Graph, NodeId, ProbabilityScheme};
pub use sampler::{SamplePool, SamplingContext};
pub use solver::{revised_imm, Solution, SolverParams};
