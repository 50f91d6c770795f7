//! Finite underspecified POMDPs, exact minimax-regret game solving, iterated
//! Bayesian level-perfect refinement, and ReMiDi-style level-buffer training.
//!
//! The crate is organized around a small exact core:
//!
//! - [`upomdp`] — levels, trajectories, trajectory-conditioned policies, and
//!   finite per-level dynamics;
//! - [`enumeration`] — exact rollout enumeration and realisable-trajectory
//!   computation;
//! - [`oracle`] — per-level optimal values, exact regret, and the score
//!   functions used by level-buffer curation;
//! - [`games`] — decision-matrix rules, zero-sum equilibria, and the
//!   (refined) minimax-regret game over enumerated strategies;
//! - [`blp`] — iterated refinement to a Bayesian level-perfect policy, plus
//!   executable checks of the refinement guarantees;
//! - [`learners`] — tabular actor-critic dynamics for agent and bandit
//!   adversary;
//! - [`plr`] — scored, staleness-aware level buffers with prioritized replay;
//! - [`remidi`] — multi-buffer training with trajectory-overlap rejection and
//!   masked policy updates;
//! - [`envs`] — the environment families (tabular game, lever, gridworld,
//!   betting fixture) and a random-instance generator for property checks.

pub mod blp;
pub mod enumeration;
pub mod envs;
pub mod error;
pub mod games;
pub mod learners;
pub mod oracle;
pub mod plr;
pub mod remidi;
pub mod rng;
pub mod upomdp;

pub use enumeration::{
    enumerate_outcomes, expected_return, realisable_trajectories, trajectory_overlap, Outcome,
    Overlap,
};
pub use error::{Error, Result};
pub use oracle::{mc_regret, optimal_return, regret};
pub use upomdp::{
    ActionId, DefaultRule, DeterministicPolicy, Level, LevelDynamics, Obs, RealisableSet,
    TabularPolicy, Trajectory, Upomdp,
};
