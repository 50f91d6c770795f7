//! Exact per-level optima, exact regret, and approximate score functions.
//!
//! `optimal_return` runs backward induction on a level's own trajectory tree
//! (with a state-space shortcut for deterministic levels); the same belief
//! recursion generalizes to best responses against weighted level mixtures,
//! optionally constrained to match a base policy on a frozen trajectory set.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::enumeration::{expected_return, sample_rollout};
use crate::error::{Error, Result};
use crate::upomdp::{
    DeterministicPolicy, Level, LevelDynamics, Obs, RealisableSet, TabularPolicy,
    Trajectory, Upomdp,
};

/// Maximum expected return achievable on a single known level, with a
/// deterministic witness policy keyed on the trajectories it visits.
pub fn optimal_return(level: &Level, upomdp: &Upomdp) -> Result<(f64, DeterministicPolicy)> {
    let dynamics = upomdp.dynamics_for(level)?;
    if dynamics.is_deterministic() {
        return deterministic_optimum(&dynamics, upomdp.horizon(), upomdp.discount());
    }
    let (value, witness) = best_response(upomdp, &[(level.clone(), 1.0)], None)?;
    Ok((value, witness))
}

/// Exact regret of `policy` on `level`: optimal return minus expected return.
pub fn regret(policy: &TabularPolicy, level: &Level, upomdp: &Upomdp) -> Result<f64> {
    let (opt, _) = optimal_return(level, upomdp)?;
    let u = expected_return(policy, level, upomdp)?;
    Ok(opt - u)
}

/// Monte Carlo regret: exact optimal return minus the seeded sample-average
/// return over `episodes` rollouts.
pub fn mc_regret(
    policy: &TabularPolicy,
    level: &Level,
    upomdp: &Upomdp,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    assert!(episodes >= 1, "episodes must be >= 1");
    let (opt, _) = optimal_return(level, upomdp)?;
    let dynamics = upomdp.dynamics_for(level)?;
    let mut total = 0.0;
    for _ in 0..episodes {
        total += sample_rollout(policy, &dynamics, upomdp.horizon(), upomdp.discount(), rng).ret;
    }
    Ok(opt - total / episodes as f64)
}

/// Positive value loss: the mean of the positive one-episode advantage
/// estimates (generalized-advantage weighting with the given discount and
/// lambda), or 0 when no transition has positive advantage.
pub fn score_pvl(
    value_estimates: &[f64],
    rewards: &[f64],
    discount: f64,
    gae_lambda: f64,
) -> f64 {
    assert_eq!(value_estimates.len(), rewards.len());
    let n = rewards.len();
    if n == 0 {
        return 0.0;
    }
    // delta_t = r_t + gamma * V(s_{t+1}) - V(s_t), with V past the end = 0.
    let mut deltas = vec![0.0; n];
    for t in 0..n {
        let next_v = if t + 1 < n { value_estimates[t + 1] } else { 0.0 };
        deltas[t] = rewards[t] + discount * next_v - value_estimates[t];
    }
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        acc = deltas[t] + discount * gae_lambda * acc;
        advantages[t] = acc;
    }
    let positives: Vec<f64> = advantages.into_iter().filter(|a| *a > 0.0).collect();
    if positives.is_empty() {
        0.0
    } else {
        positives.iter().sum::<f64>() / positives.len() as f64
    }
}

/// Maximum Monte Carlo score: best return ever seen on the level minus this
/// episode's return. The caller persists the updated maximum.
pub fn score_maxmc(best_seen_return: f64, episode_return: f64) -> (f64, f64) {
    let new_best = best_seen_return.max(episode_return);
    (new_best - episode_return, new_best)
}

/// Minimax-return baseline score: the negative of the episode return.
pub fn score_neg_return(episode_return: f64) -> f64 {
    -episode_return
}

fn deterministic_optimum(
    dynamics: &LevelDynamics,
    horizon: usize,
    discount: f64,
) -> Result<(f64, DeterministicPolicy)> {
    let states = dynamics.state_count;
    // value[t][s]: best discounted-from-episode-start return collectable from
    // state s at step t. Valid because deterministic dynamics make the
    // trajectory equivalent to the state path.
    let mut value = vec![vec![0.0; states]; horizon + 1];
    let mut best_action = vec![vec![0usize; states]; horizon];
    for t in (0..horizon).rev() {
        for s in 0..states {
            if dynamics.terminal[s] {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for a in 0..dynamics.action_count {
                let next = dynamics.transition(s, a)[0].0;
                let q = discount.powi(t as i32) * dynamics.reward(s, a) + value[t + 1][next];
                if q > best {
                    best = q;
                    arg = a;
                }
            }
            value[t][s] = best;
            best_action[t][s] = arg;
        }
    }
    // Materialize the witness along its own (single) path.
    let mut witness = DeterministicPolicy::new();
    let mut state = dynamics.initial[0].0;
    let mut traj = Trajectory::root(dynamics.obs[state]);
    for t in 0..horizon {
        if dynamics.terminal[state] {
            break;
        }
        let a = best_action[t][state];
        witness.table.insert(traj.clone(), a);
        state = dynamics.transition(state, a)[0].0;
        traj = traj.extend(a, dynamics.obs[state]);
    }
    Ok((value[0][dynamics.initial[0].0], witness))
}

/// A belief over `(level slot, state)` pairs with unnormalized probabilities.
type BeliefEntries = Vec<(usize, usize, f64)>;

/// Best response to a weighted mixture of levels: maximizes
/// `sum_i w_i * U_i(policy)` by backward induction on the joint belief tree.
///
/// When `frozen` is given, the policy is constrained to play the base policy
/// exactly on every trajectory in the frozen set; the witness then covers
/// only the free keys it decides.
pub fn best_response(
    upomdp: &Upomdp,
    weighted: &[(Level, f64)],
    frozen: Option<(&RealisableSet, &TabularPolicy)>,
) -> Result<(f64, DeterministicPolicy)> {
    let dynamics: Vec<Arc<LevelDynamics>> = weighted
        .iter()
        .map(|(l, _)| upomdp.dynamics_for(l))
        .collect::<Result<_>>()?;
    // Group initial states by their observation token into root nodes.
    let mut roots: BTreeMap<Obs, BeliefEntries> = BTreeMap::new();
    for (slot, (_, w)) in weighted.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        for &(s, p) in &dynamics[slot].initial {
            if p <= 0.0 {
                continue;
            }
            roots
                .entry(dynamics[slot].obs[s])
                .or_default()
                .push((slot, s, w * p));
        }
    }
    let mut eval = BeliefBackward {
        dynamics: &dynamics,
        action_count: upomdp.action_count(),
        horizon: upomdp.horizon(),
        discount: upomdp.discount(),
        budget: upomdp.node_budget(),
        nodes: 0,
        frozen,
        witness: DeterministicPolicy::new(),
    };
    let mut total = 0.0;
    for (obs, entries) in roots {
        total += eval.node_value(&Trajectory::root(obs), &entries, 0)?;
    }
    Ok((total, eval.witness))
}

/// Optimal continuation value from an interior belief node (used to audit
/// posterior optimality along realisable trajectories). Returns the value of
/// the best continuation together with the value of following `policy`.
pub fn continuation_values(
    upomdp: &Upomdp,
    weighted: &[(Level, f64)],
    trajectory: &Trajectory,
    states_per_level: &[Vec<(usize, f64)>],
    policy: &TabularPolicy,
) -> Result<(f64, f64)> {
    let dynamics: Vec<Arc<LevelDynamics>> = weighted
        .iter()
        .map(|(l, _)| upomdp.dynamics_for(l))
        .collect::<Result<_>>()?;
    let mut entries: BeliefEntries = Vec::new();
    for (slot, ((_, w), states)) in weighted.iter().zip(states_per_level).enumerate() {
        for &(s, p) in states {
            if *w * p > 0.0 {
                entries.push((slot, s, *w * p));
            }
        }
    }
    let t0 = trajectory.len();
    let mut opt: BeliefBackward<'_, FrozenAll> = BeliefBackward {
        dynamics: &dynamics,
        action_count: upomdp.action_count(),
        horizon: upomdp.horizon(),
        discount: upomdp.discount(),
        budget: upomdp.node_budget(),
        nodes: 0,
        frozen: None,
        witness: DeterministicPolicy::new(),
    };
    let optimal = opt.node_value(trajectory, &entries, t0)?;
    let mut under = BeliefBackward {
        dynamics: &dynamics,
        action_count: upomdp.action_count(),
        horizon: upomdp.horizon(),
        discount: upomdp.discount(),
        budget: upomdp.node_budget(),
        nodes: 0,
        frozen: Some((&EVERYTHING_FROZEN, policy)),
        witness: DeterministicPolicy::new(),
    };
    let current = under.node_value(trajectory, &entries, t0)?;
    Ok((optimal, current))
}

/// Sentinel frozen set matching every trajectory (policy evaluation mode).
struct FrozenAll;
static EVERYTHING_FROZEN: FrozenAll = FrozenAll;

trait FrozenLookup {
    fn is_frozen(&self, t: &Trajectory) -> bool;
}

impl FrozenLookup for RealisableSet {
    fn is_frozen(&self, t: &Trajectory) -> bool {
        self.contains(t)
    }
}

impl FrozenLookup for FrozenAll {
    fn is_frozen(&self, _: &Trajectory) -> bool {
        true
    }
}

struct BeliefBackward<'a, F: FrozenLookup + ?Sized> {
    dynamics: &'a [Arc<LevelDynamics>],
    action_count: usize,
    horizon: usize,
    discount: f64,
    budget: usize,
    nodes: usize,
    frozen: Option<(&'a F, &'a TabularPolicy)>,
    witness: DeterministicPolicy,
}

impl<'a, F: FrozenLookup + ?Sized> BeliefBackward<'a, F> {
    fn node_value(&mut self, traj: &Trajectory, entries: &BeliefEntries, t: usize) -> Result<f64> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded {
                nodes: self.nodes,
                budget: self.budget,
            });
        }
        // A terminal (level, state) pair contributes nothing further.
        let live: BeliefEntries = entries
            .iter()
            .copied()
            .filter(|&(slot, s, p)| p > 0.0 && !self.dynamics[slot].terminal[s])
            .collect();
        if live.is_empty() || t == self.horizon {
            return Ok(0.0);
        }
        let constrained = self
            .frozen
            .as_ref()
            .filter(|(set, _)| set.is_frozen(traj))
            .map(|(_, base)| base.probs(traj).into_owned());
        let mut best = f64::NEG_INFINITY;
        let mut best_action = 0usize;
        let mut constrained_total = 0.0;
        for action in 0..self.action_count {
            if let Some(probs) = &constrained {
                if probs[action] <= 0.0 {
                    continue;
                }
            }
            let mut q = 0.0;
            let mut children: BTreeMap<Obs, BeliefEntries> = BTreeMap::new();
            for &(slot, s, p) in &live {
                let d = &self.dynamics[slot];
                q += p * self.discount.powi(t as i32) * d.reward(s, action);
                for &(next, pt) in d.transition(s, action) {
                    if pt <= 0.0 {
                        continue;
                    }
                    children
                        .entry(d.obs[next])
                        .or_default()
                        .push((slot, next, p * pt));
                }
            }
            for (obs, child_entries) in children {
                q += self.node_value(&traj.extend(action, obs), &child_entries, t + 1)?;
            }
            match &constrained {
                Some(probs) => constrained_total += probs[action] * q,
                None => {
                    if q > best {
                        best = q;
                        best_action = action;
                    }
                }
            }
        }
        if constrained.is_some() {
            Ok(constrained_total)
        } else {
            self.witness.table.insert(traj.clone(), best_action);
            Ok(best)
        }
    }
}

/// Filter the state distribution of a single level given an observed
/// trajectory: unnormalized `P(state, observations | actions, level)`.
/// Returns an empty vector when the trajectory is impossible on the level.
pub fn filter_states(dynamics: &LevelDynamics, trajectory: &Trajectory) -> Vec<(usize, f64)> {
    let obs = trajectory.observations();
    let actions = trajectory.actions();
    let mut current: Vec<(usize, f64)> = dynamics
        .initial
        .iter()
        .copied()
        .filter(|&(s, p)| p > 0.0 && dynamics.obs[s] == obs[0])
        .collect();
    for (i, &a) in actions.iter().enumerate() {
        let mut next: BTreeMap<usize, f64> = BTreeMap::new();
        for &(s, p) in &current {
            if dynamics.terminal[s] {
                continue;
            }
            for &(s2, pt) in dynamics.transition(s, a) {
                if pt > 0.0 && dynamics.obs[s2] == obs[i + 1] {
                    *next.entry(s2).or_insert(0.0) += p * pt;
                }
            }
        }
        current = next.into_iter().collect();
        if current.is_empty() {
            return current;
        }
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::upomdp::Obs;
    use rand_chacha::rand_core::SeedableRng;

    fn one_step_level(rewards: [f64; 2], obs: u64) -> (Level, LevelDynamics) {
        let level = Level::new("test", serde_json::json!({ "obs": obs }));
        let d = LevelDynamics {
            state_count: 2,
            action_count: 2,
            initial: vec![(0, 1.0)],
            obs: vec![Obs(obs), Obs(u64::MAX)],
            transitions: vec![vec![(1, 1.0)], vec![(1, 1.0)], vec![], vec![]],
            rewards: vec![rewards[0], rewards[1], 0.0, 0.0],
            terminal: vec![false, true],
        };
        (level, d)
    }

    fn tiny_upomdp() -> Upomdp {
        Upomdp::new(
            2,
            "test",
            1,
            1.0,
            vec![one_step_level([-1.0, 1.0], 5), one_step_level([1.0, -1.0], 6)],
        )
        .unwrap()
    }

    #[test]
    fn optimal_return_and_witness() {
        let upomdp = tiny_upomdp();
        let (v, witness) = optimal_return(&upomdp.levels()[0], &upomdp).unwrap();
        assert_eq!(v, 1.0);
        let policy = witness.overlay_on(&TabularPolicy::uniform(2));
        let u = expected_return(&policy, &upomdp.levels()[0], &upomdp).unwrap();
        assert_eq!(u, 1.0);
    }

    #[test]
    fn regret_of_witness_is_zero() {
        let upomdp = tiny_upomdp();
        let (_, witness) = optimal_return(&upomdp.levels()[1], &upomdp).unwrap();
        let policy = witness.overlay_on(&TabularPolicy::uniform(2));
        let r = regret(&policy, &upomdp.levels()[1], &upomdp).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn mc_regret_matches_exact_for_deterministic() {
        let upomdp = tiny_upomdp();
        let mut policy = TabularPolicy::uniform(2);
        policy
            .set(Trajectory::root(Obs(5)), vec![1.0, 0.0])
            .unwrap();
        let exact = regret(&policy, &upomdp.levels()[0], &upomdp).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mc = mc_regret(&policy, &upomdp.levels()[0], &upomdp, 7, &mut rng).unwrap();
        assert_eq!(mc, exact);
        assert_eq!(exact, 2.0);
    }

    #[test]
    fn pvl_single_step_cases() {
        // One positive TD error of 1.
        assert_eq!(score_pvl(&[0.0], &[1.0], 1.0, 1.0), 1.0);
        // Negative loss excluded.
        assert_eq!(score_pvl(&[2.0], &[1.0], 1.0, 1.0), 0.0);
        // Empty episode.
        assert_eq!(score_pvl(&[], &[], 0.99, 0.95), 0.0);
    }

    #[test]
    fn pvl_zero_when_values_match_returns() {
        // Realized returns for r = [1, 2, 3], gamma = 1: G = [6, 5, 3].
        assert_eq!(score_pvl(&[6.0, 5.0, 3.0], &[1.0, 2.0, 3.0], 1.0, 1.0), 0.0);
    }

    #[test]
    fn maxmc_tracking() {
        let (s, best) = score_maxmc(f64::NEG_INFINITY, 0.5);
        assert_eq!(s, 0.0);
        assert_eq!(best, 0.5);
        let (s, best) = score_maxmc(0.9, 0.5);
        assert_eq!(s, 0.4);
        assert_eq!(best, 0.9);
        let (s, best) = score_maxmc(0.9, 1.0);
        assert_eq!(s, 0.0);
        assert_eq!(best, 1.0);
    }

    #[test]
    fn neg_return_score() {
        assert_eq!(score_neg_return(1.0), -1.0);
        assert_eq!(score_neg_return(0.0), 0.0);
        assert_eq!(score_neg_return(-9.6875), 9.6875);
    }

    #[test]
    fn best_response_to_mixture() {
        let upomdp = tiny_upomdp();
        // Levels share no observation, so the best response is optimal on both.
        let weighted = vec![
            (upomdp.levels()[0].clone(), 0.5),
            (upomdp.levels()[1].clone(), 0.5),
        ];
        let (v, witness) = best_response(&upomdp, &weighted, None).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(witness.table.len(), 2);
    }

    #[test]
    fn filter_states_respects_observations() {
        let upomdp = tiny_upomdp();
        let d = upomdp.dynamics_for(&upomdp.levels()[0]).unwrap();
        let good = filter_states(&d, &Trajectory::root(Obs(5)));
        assert_eq!(good, vec![(0, 1.0)]);
        let bad = filter_states(&d, &Trajectory::root(Obs(6)));
        assert!(bad.is_empty());
    }
}
