//! Decision-matrix rules, exact zero-sum equilibria, and (refined)
//! minimax-regret games.

mod matrix;
mod mmr;
mod zerosum;

pub use matrix::{regret_matrix, rule_leximin, rule_minimax, rule_minimax_regret, DecisionMatrix};
pub use mmr::{
    behavioral_from_mixture, compose_strategy, enumerate_agent_strategies, reachable_free_keys,
    solve_mmr_game, solve_refined_game, verify_refinement, RefinedGameSpec, RefinementReport,
    STRATEGY_BUDGET, SUPPORT_EPS,
};
pub use zerosum::{duality_gap, solve_zero_sum, support_enumeration, GameSolution};
