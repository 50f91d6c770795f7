//! Minimax-regret games over enumerated deterministic strategies, and the
//! refined game that freezes behavior on a base policy's realisable set.
//!
//! Games decompose into independent components: two levels interact only
//! when they share a reachable free trajectory key, so each component is
//! solved on its own payoff matrix (or by constrained backward induction for
//! single-level components, where enumeration would be pointless). The
//! adversary plays the equilibrium of the worst-value component(s); the
//! agent's behavior outside solved components stays at the base/default rule
//! unless that would break the minimax bound, in which case those components
//! are solved too.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::enumeration::{expected_return, realisable_trajectories};
use crate::error::{Error, Result};
use crate::games::matrix::DecisionMatrix;
use crate::games::zerosum::{solve_zero_sum, GameSolution};
use crate::oracle::{best_response, optimal_return};
use crate::upomdp::{
    DeterministicPolicy, Level, RealisableSet, TabularPolicy, Trajectory, Upomdp,
};

/// Probability below which adversary mass is treated as solver dust.
pub const SUPPORT_EPS: f64 = 1e-9;

/// Maximum number of deterministic strategies enumerated per component.
pub const STRATEGY_BUDGET: usize = 250_000;

/// The refined minimax-regret game under a base policy and protected levels.
#[derive(Clone, Debug)]
pub struct RefinedGameSpec {
    pub base_policy: TabularPolicy,
    pub protected_levels: Vec<Level>,
    pub free_levels: Vec<Level>,
    pub frozen_trajectories: RealisableSet,
}

impl RefinedGameSpec {
    /// Build the spec from a base policy and a protected subset: the free
    /// set is the complement within the level space and the frozen set is
    /// everything realisable under the base policy on the protected levels.
    pub fn new(
        base_policy: TabularPolicy,
        protected: &[Level],
        upomdp: &Upomdp,
    ) -> Result<Self> {
        let protected_ids: BTreeSet<u64> = protected.iter().map(|l| l.id).collect();
        let free_levels: Vec<Level> = upomdp
            .levels()
            .iter()
            .filter(|l| !protected_ids.contains(&l.id))
            .cloned()
            .collect();
        let frozen_trajectories = realisable_trajectories(&base_policy, protected, upomdp)?;
        Ok(RefinedGameSpec {
            base_policy,
            protected_levels: protected.to_vec(),
            free_levels,
            frozen_trajectories,
        })
    }

    pub fn validate(&self, upomdp: &Upomdp) -> Result<()> {
        let mut ids = BTreeSet::new();
        for l in self.protected_levels.iter().chain(&self.free_levels) {
            if !ids.insert(l.id) {
                return Err(Error::Unsupported(format!(
                    "level {} appears in both protected and free sets",
                    l.id
                )));
            }
        }
        let space: BTreeSet<u64> = upomdp.levels().iter().map(|l| l.id).collect();
        if ids != space {
            return Err(Error::Unsupported(
                "protected and free sets must partition the level space".into(),
            ));
        }
        if !self.frozen_trajectories.is_prefix_closed() {
            return Err(Error::Unsupported("frozen set is not prefix-closed".into()));
        }
        Ok(())
    }
}

/// Decision keys (non-terminal trajectory prefixes where the policy acts)
/// reachable on `level` under any free behavior; through frozen keys only
/// the base policy's support is followed, and frozen keys themselves are
/// excluded from the result.
pub fn reachable_free_keys(
    upomdp: &Upomdp,
    level: &Level,
    frozen: Option<(&RealisableSet, &TabularPolicy)>,
) -> Result<BTreeSet<Trajectory>> {
    let dynamics = upomdp.dynamics_for(level)?;
    let mut keys = BTreeSet::new();
    struct Rec<'a> {
        dynamics: &'a crate::upomdp::LevelDynamics,
        horizon: usize,
        action_count: usize,
        budget: usize,
        nodes: usize,
        frozen: Option<(&'a RealisableSet, &'a TabularPolicy)>,
        keys: &'a mut BTreeSet<Trajectory>,
    }
    impl<'a> Rec<'a> {
        fn go(&mut self, state: usize, traj: Trajectory, t: usize) -> Result<()> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExceeded {
                    nodes: self.nodes,
                    budget: self.budget,
                });
            }
            if self.dynamics.terminal[state] || t == self.horizon {
                return Ok(());
            }
            let frozen_here = self
                .frozen
                .as_ref()
                .filter(|(set, _)| set.contains(&traj))
                .map(|(_, base)| base.probs(&traj).into_owned());
            if frozen_here.is_none() {
                self.keys.insert(traj.clone());
            }
            for action in 0..self.action_count {
                if let Some(probs) = &frozen_here {
                    if probs[action] <= 0.0 {
                        continue;
                    }
                }
                for &(next, pt) in self.dynamics.transition(state, action) {
                    if pt <= 0.0 {
                        continue;
                    }
                    let next_traj = traj.extend(action, self.dynamics.obs[next]);
                    self.go(next, next_traj, t + 1)?;
                }
            }
            Ok(())
        }
    }
    let mut rec = Rec {
        dynamics: &dynamics,
        horizon: upomdp.horizon(),
        action_count: upomdp.action_count(),
        budget: upomdp.node_budget(),
        nodes: 0,
        frozen,
        keys: &mut keys,
    };
    for (s, p0) in dynamics.initial.clone() {
        if p0 > 0.0 {
            rec.go(s, Trajectory::root(dynamics.obs[s]), 0)?;
        }
    }
    Ok(keys)
}

/// All deterministic assignments over the free trajectory keys reachable in
/// `levels`. On frozen keys every returned policy defers to the base policy;
/// the returned tables cover the free keys only.
pub fn enumerate_agent_strategies(
    upomdp: &Upomdp,
    levels: &[Level],
    frozen: Option<&RealisableSet>,
    base_policy: Option<&TabularPolicy>,
) -> Result<Vec<DeterministicPolicy>> {
    let fz = match (frozen, base_policy) {
        (Some(f), Some(b)) => Some((f, b)),
        _ => None,
    };
    let mut keys = BTreeSet::new();
    for level in levels {
        keys.extend(reachable_free_keys(upomdp, level, fz)?);
    }
    strategies_over_keys(&keys, upomdp.action_count())
}

fn strategies_over_keys(
    keys: &BTreeSet<Trajectory>,
    action_count: usize,
) -> Result<Vec<DeterministicPolicy>> {
    let count = checked_strategy_count(keys.len(), action_count)?;
    let key_list: Vec<&Trajectory> = keys.iter().collect();
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; key_list.len()];
    loop {
        let mut policy = DeterministicPolicy::new();
        for (key, &a) in key_list.iter().zip(&digits) {
            policy.table.insert((*key).clone(), a);
        }
        out.push(policy);
        // Mixed-radix increment over the sorted keys.
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(out);
            }
            digits[i] += 1;
            if digits[i] < action_count {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn checked_strategy_count(keys: usize, action_count: usize) -> Result<usize> {
    let mut n: u128 = 1;
    for _ in 0..keys {
        n = n.saturating_mul(action_count as u128);
        if n > STRATEGY_BUDGET as u128 {
            return Err(Error::StrategyBudgetExceeded {
                keys,
                actions: action_count,
            });
        }
    }
    Ok(n as usize)
}

/// Compose a (partial) deterministic strategy with the frozen base behavior:
/// base distributions on frozen trajectories, one-hot strategy actions on
/// free keys, the uniform default elsewhere.
pub fn compose_strategy(
    strategy: &DeterministicPolicy,
    base: Option<(&RealisableSet, &TabularPolicy)>,
    action_count: usize,
) -> TabularPolicy {
    let mut policy = TabularPolicy::uniform(action_count);
    if let Some((frozen, base)) = base {
        for traj in frozen.iter() {
            let probs = base.probs(traj).into_owned();
            policy
                .set(traj.clone(), probs)
                .expect("base policy rows are valid distributions");
        }
    }
    for (key, &action) in &strategy.table {
        let mut dist = vec![0.0; action_count];
        dist[action] = 1.0;
        policy.set(key.clone(), dist).expect("one-hot is valid");
    }
    policy
}

/// Convert a mixture over deterministic strategies into an equivalent
/// behavioral policy via realization weights: at each free key, condition on
/// the strategies consistent with the actions the key records at earlier
/// free keys. Zero-probability keys get the uniform distribution.
pub fn behavioral_from_mixture(
    strategies: &[DeterministicPolicy],
    weights: &[f64],
    keys: &BTreeSet<Trajectory>,
    action_count: usize,
) -> Vec<(Trajectory, Vec<f64>)> {
    let mut rows = Vec::with_capacity(keys.len());
    for key in keys {
        // Actions this key's history requires at earlier free keys.
        let mut required: Vec<(&Trajectory, usize)> = Vec::new();
        for t in 0..key.len() {
            let prefix = key.prefix(t);
            if keys.contains(&prefix) {
                required.push((key_ref(keys, &prefix), key.actions()[t]));
            }
        }
        let mut dist = vec![0.0; action_count];
        let mut total = 0.0;
        for (d, &w) in strategies.iter().zip(weights) {
            if w <= 0.0 {
                continue;
            }
            let consistent = required
                .iter()
                .all(|(p, a)| d.table.get(*p).copied() == Some(*a));
            if consistent {
                if let Some(&chosen) = d.table.get(key) {
                    dist[chosen] += w;
                    total += w;
                }
            }
        }
        if total > 0.0 {
            for p in dist.iter_mut() {
                *p /= total;
            }
        } else {
            dist = vec![1.0 / action_count as f64; action_count];
        }
        rows.push((key.clone(), dist));
    }
    rows
}

fn key_ref<'a>(keys: &'a BTreeSet<Trajectory>, key: &Trajectory) -> &'a Trajectory {
    keys.get(key).expect("prefix key present in key set")
}

/// Levels grouped into components that share at least one free key.
fn components(
    upomdp: &Upomdp,
    levels: &[Level],
    frozen: Option<(&RealisableSet, &TabularPolicy)>,
) -> Result<Vec<(Vec<usize>, BTreeSet<Trajectory>)>> {
    let key_sets: Vec<BTreeSet<Trajectory>> = levels
        .iter()
        .map(|l| reachable_free_keys(upomdp, l, frozen))
        .collect::<Result<_>>()?;
    let n = levels.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !key_sets[i].is_disjoint(&key_sets[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut grouped: std::collections::BTreeMap<usize, (Vec<usize>, BTreeSet<Trajectory>)> =
        std::collections::BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let entry = grouped.entry(root).or_default();
        entry.0.push(i);
        entry.1.extend(key_sets[i].iter().cloned());
    }
    Ok(grouped.into_values().collect())
}

struct ComponentSolution {
    /// Indices into the game's level list.
    level_indices: Vec<usize>,
    value: f64,
    /// Equilibrium distribution over `level_indices`.
    adversary: Vec<f64>,
    /// Behavioral rows for the component's free keys.
    policy_rows: Vec<(Trajectory, Vec<f64>)>,
    /// Mixture over enumerated strategies (singleton for induction path).
    mixture: Vec<f64>,
}

fn solve_component(
    upomdp: &Upomdp,
    levels: &[Level],
    indices: &[usize],
    keys: &BTreeSet<Trajectory>,
    frozen: Option<(&RealisableSet, &TabularPolicy)>,
    tolerance: f64,
) -> Result<ComponentSolution> {
    let members: Vec<&Level> = indices.iter().map(|&i| &levels[i]).collect();
    if members.len() == 1 {
        // A single known level: constrained backward induction is exact and
        // sidesteps strategy enumeration entirely.
        let level = members[0];
        let (opt, _) = optimal_return(level, upomdp)?;
        let frozen_arg = frozen.map(|(f, b)| (f, b));
        let (best, witness) = best_response(upomdp, &[(level.clone(), 1.0)], frozen_arg)?;
        let value = (opt - best).max(0.0);
        let policy_rows = witness
            .table
            .iter()
            .filter(|(k, _)| keys.contains(*k))
            .map(|(k, &a)| {
                let mut dist = vec![0.0; upomdp.action_count()];
                dist[a] = 1.0;
                (k.clone(), dist)
            })
            .collect();
        return Ok(ComponentSolution {
            level_indices: indices.to_vec(),
            value,
            adversary: vec![1.0],
            policy_rows,
            mixture: vec![1.0],
        });
    }
    let strategies = strategies_over_keys(keys, upomdp.action_count())?;
    let optima: Vec<f64> = members
        .iter()
        .map(|l| optimal_return(l, upomdp).map(|(v, _)| v))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..members.len())
        .flat_map(|i| (0..strategies.len()).map(move |j| (i, j)))
        .collect();
    let regrets: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let policy = compose_strategy(&strategies[j], frozen, upomdp.action_count());
            expected_return(&policy, members[i], upomdp).map(|u| optima[i] - u)
        })
        .collect::<Result<_>>()?;
    let matrix = DecisionMatrix::new(members.len(), strategies.len(), regrets);
    let sol = solve_zero_sum(&matrix, tolerance, simplex_budget(&matrix))?;
    let policy_rows = behavioral_from_mixture(
        &strategies,
        &sol.agent_mixture,
        keys,
        upomdp.action_count(),
    );
    Ok(ComponentSolution {
        level_indices: indices.to_vec(),
        value: sol.value,
        adversary: sol.adversary_distribution,
        policy_rows,
        mixture: sol.agent_mixture,
    })
}

fn simplex_budget(matrix: &DecisionMatrix) -> usize {
    1000 + 20 * (matrix.rows() + matrix.cols())
}

/// Solve the minimax-regret game over `levels`: the adversary (rows) picks a
/// level to maximize regret, the agent (columns) a deterministic strategy.
///
/// Returns the equilibrium behavioral policy together with the solution:
/// `adversary_distribution` is indexed by `levels`, `value` is the game
/// value, and `duality_gap` is recomputed globally from a belief-space best
/// response. The worst-case regret of the returned policy over `levels` is
/// at most `value + tolerance`.
pub fn solve_mmr_game(
    upomdp: &Upomdp,
    levels: &[Level],
    tolerance: f64,
) -> Result<(TabularPolicy, GameSolution)> {
    assert!(!levels.is_empty(), "level set must be nonempty");
    solve_regret_game(upomdp, levels, None, tolerance)
}

/// Solve the refined game: agent strategies defer to the base policy on all
/// frozen trajectories, the adversary plays only the free levels. The
/// returned policy equals the base policy exactly on every frozen key.
pub fn solve_refined_game(
    spec: &RefinedGameSpec,
    upomdp: &Upomdp,
    tolerance: f64,
) -> Result<(TabularPolicy, GameSolution)> {
    if spec.free_levels.is_empty() {
        return Err(Error::NothingToRefine);
    }
    spec.validate(upomdp)?;
    solve_regret_game(
        upomdp,
        &spec.free_levels,
        Some((&spec.frozen_trajectories, &spec.base_policy)),
        tolerance,
    )
}

fn solve_regret_game(
    upomdp: &Upomdp,
    levels: &[Level],
    frozen: Option<(&RealisableSet, &TabularPolicy)>,
    tolerance: f64,
) -> Result<(TabularPolicy, GameSolution)> {
    let comps = components(upomdp, levels, frozen)?;
    let mut solved: Vec<ComponentSolution> = comps
        .iter()
        .map(|(indices, keys)| solve_component(upomdp, levels, indices, keys, frozen, tolerance))
        .collect::<Result<_>>()?;
    let v_max = solved
        .iter()
        .map(|c| c.value)
        .fold(f64::NEG_INFINITY, f64::max);

    // Start from the base policy (or the uniform default) and overlay the
    // solved rows of components that must carry equilibrium behavior: the
    // tied worst components always, and any other component whose default
    // behavior would break the minimax bound.
    let mut policy = match frozen {
        Some((_, base)) => base.clone(),
        None => TabularPolicy::uniform(upomdp.action_count()),
    };
    let mut adversary = vec![0.0; levels.len()];
    let tied: Vec<usize> = (0..solved.len())
        .filter(|&c| solved[c].value >= v_max - SUPPORT_EPS)
        .collect();
    for &c in &tied {
        let comp = &solved[c];
        if comp.value <= SUPPORT_EPS {
            // Zero-value component: the solved policy has zero regret on
            // every member, so any adversary distribution is optimal; use
            // the uniform one so coverage-style callers see full support.
            let share = 1.0 / (tied.len() as f64 * comp.level_indices.len() as f64);
            for &li in &comp.level_indices {
                adversary[li] += share;
            }
        } else {
            for (slot, &li) in comp.level_indices.iter().enumerate() {
                adversary[li] += comp.adversary[slot] / tied.len() as f64;
            }
        }
    }
    let tied_set: BTreeSet<usize> = tied.iter().copied().collect();
    for c in 0..solved.len() {
        let install = if tied_set.contains(&c) {
            true
        } else {
            // Keep the default behavior unless it breaks the bound.
            let default_worst = solved[c]
                .level_indices
                .iter()
                .map(|&li| regret_of(&policy, &levels[li], upomdp))
                .try_fold(f64::NEG_INFINITY, |acc, r| r.map(|r| acc.max(r)))?;
            default_worst > v_max + SUPPORT_EPS
        };
        if install {
            let rows = std::mem::take(&mut solved[c].policy_rows);
            for (key, dist) in rows {
                policy.set(key, dist)?;
            }
        }
    }
    // Independent duality certificate on the composite game.
    let upper = levels
        .iter()
        .map(|l| regret_of(&policy, l, upomdp))
        .try_fold(f64::NEG_INFINITY, |acc, r| r.map(|r| acc.max(r)))?;
    let weighted: Vec<(Level, f64)> = levels
        .iter()
        .zip(&adversary)
        .filter(|(_, &w)| w > 0.0)
        .map(|(l, &w)| (l.clone(), w))
        .collect();
    let (best_u, _) = best_response(upomdp, &weighted, frozen)?;
    let mut exp_opt = 0.0;
    for (l, w) in &weighted {
        exp_opt += w * optimal_return(l, upomdp)?.0;
    }
    let lower = exp_opt - best_u;
    let gap = (upper - lower).max(0.0);
    if gap > tolerance {
        return Err(Error::NotConverged {
            iterations: 0,
            gap,
        });
    }
    let solution = GameSolution {
        agent_mixture: vec![1.0],
        adversary_distribution: adversary,
        value: v_max,
        duality_gap: gap,
    };
    Ok((policy, solution))
}

fn regret_of(policy: &TabularPolicy, level: &Level, upomdp: &Upomdp) -> Result<f64> {
    let (opt, _) = optimal_return(level, upomdp)?;
    let u = expected_return(policy, level, upomdp)?;
    Ok(opt - u)
}

/// Executable check of the refinement guarantees: (a) the refined policy's
/// regret equals the base policy's on every protected level; (b) its worst
/// free-level regret does not exceed the base policy's.
#[derive(Clone, Debug)]
pub struct RefinementReport {
    pub regret_equality_on_protected: bool,
    pub worst_case_improvement_on_free: bool,
    pub details: Vec<String>,
}

impl RefinementReport {
    pub fn all_ok(&self) -> bool {
        self.regret_equality_on_protected && self.worst_case_improvement_on_free
    }
}

pub fn verify_refinement(
    base_policy: &TabularPolicy,
    refined_policy: &TabularPolicy,
    spec: &RefinedGameSpec,
    upomdp: &Upomdp,
    tolerance: f64,
) -> Result<RefinementReport> {
    let mut details = Vec::new();
    let mut equality = true;
    for level in &spec.protected_levels {
        let base = regret_of(base_policy, level, upomdp)?;
        let refined = regret_of(refined_policy, level, upomdp)?;
        if (base - refined).abs() > tolerance {
            equality = false;
            details.push(format!(
                "protected level {}: base regret {base}, refined regret {refined}",
                level.id
            ));
        }
    }
    let mut base_worst = f64::NEG_INFINITY;
    let mut refined_worst = f64::NEG_INFINITY;
    for level in &spec.free_levels {
        base_worst = base_worst.max(regret_of(base_policy, level, upomdp)?);
        refined_worst = refined_worst.max(regret_of(refined_policy, level, upomdp)?);
    }
    let improvement = spec.free_levels.is_empty() || refined_worst <= base_worst + tolerance;
    if !improvement {
        details.push(format!(
            "free-level worst regret rose: base {base_worst}, refined {refined_worst}"
        ));
    }
    Ok(RefinementReport {
        regret_equality_on_protected: equality,
        worst_case_improvement_on_free: improvement,
        details,
    })
}
