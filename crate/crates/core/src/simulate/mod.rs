//! Exact forward simulation of the branching population with per-site
//! mutation at division.

mod chain;
mod engine;
mod model;
mod tree;

pub use chain::{
    coupled_chain_step, descendant_chain_probs, embedded_chain_step_b, embedded_chain_step_bhat, mutant_chain_probs,
    run_mutant_chain, single_site_tail, tail_points, TailPoint,
};
pub use engine::{simulate_to_n, SimOptions, SimOutcome, Simulator, DEFAULT_MEMORY_BUDGET};
pub use model::{FitnessModel, Genome, MutationKind, MutationModel, RateMatrix, Rates, SelectiveGenotype};
pub use tree::{descendant_fractions, Fate, LineageTree, TreeNode};
