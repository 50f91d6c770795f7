//! Exact rollout enumeration over (policy, level) pairs.
//!
//! All quantities here are computed by enumerating every stochastic branch
//! (initial states, policy mixing weights, transitions) in a fixed,
//! deterministic order — no sampling. Zero-probability branches are pruned,
//! so realisability is support-based with no epsilon threshold.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::upomdp::{
    ActionId, Level, LevelDynamics, RealisableSet, TabularPolicy, Trajectory, Upomdp,
};

/// One complete episode branch: the trajectory, its occurrence probability,
/// and its discounted return.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub trajectory: Trajectory,
    pub probability: f64,
    pub ret: f64,
}

struct Walker<'a, F: FnMut(&Trajectory, f64, f64)> {
    dynamics: &'a LevelDynamics,
    policy: &'a TabularPolicy,
    horizon: usize,
    discount: f64,
    budget: usize,
    nodes: usize,
    emit: F,
}

impl<'a, F: FnMut(&Trajectory, f64, f64)> Walker<'a, F> {
    fn walk(&mut self) -> Result<()> {
        let init = self.dynamics.initial.clone();
        for (state, p0) in init {
            if p0 <= 0.0 {
                continue;
            }
            let traj = Trajectory::root(self.dynamics.obs[state]);
            self.step(state, traj, p0, 0.0, 0)?;
        }
        Ok(())
    }

    fn step(
        &mut self,
        state: usize,
        traj: Trajectory,
        prob: f64,
        ret: f64,
        t: usize,
    ) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded {
                nodes: self.nodes,
                budget: self.budget,
            });
        }
        if self.dynamics.terminal[state] || t == self.horizon {
            (self.emit)(&traj, prob, ret);
            return Ok(());
        }
        let probs = self.policy.probs(&traj).into_owned();
        for (action, &pa) in probs.iter().enumerate() {
            if pa <= 0.0 {
                continue;
            }
            let r = self.dynamics.reward(state, action);
            let step_ret = ret + self.discount.powi(t as i32) * r;
            for &(next, pt) in self.dynamics.transition(state, action) {
                if pt <= 0.0 {
                    continue;
                }
                let next_traj = traj.extend(action, self.dynamics.obs[next]);
                self.step(next, next_traj, prob * pa * pt, step_ret, t + 1)?;
            }
        }
        Ok(())
    }
}

/// Visit every positive-probability branch of `(policy, level)` in
/// deterministic order, calling `emit(trajectory, probability, return)` at
/// each episode end. The shared engine behind all exact operations.
pub fn visit_outcomes<F: FnMut(&Trajectory, f64, f64)>(
    policy: &TabularPolicy,
    dynamics: &LevelDynamics,
    horizon: usize,
    discount: f64,
    budget: usize,
    emit: F,
) -> Result<()> {
    let mut walker = Walker {
        dynamics,
        policy,
        horizon,
        discount,
        budget,
        nodes: 0,
        emit,
    };
    walker.walk()
}

/// The exact expected discounted return of `policy` on `level`.
pub fn expected_return(policy: &TabularPolicy, level: &Level, upomdp: &Upomdp) -> Result<f64> {
    let dynamics = upomdp.dynamics_for(level)?;
    let mut total = 0.0;
    visit_outcomes(
        policy,
        &dynamics,
        upomdp.horizon(),
        upomdp.discount(),
        upomdp.node_budget(),
        |_, p, ret| total += p * ret,
    )?;
    Ok(total)
}

/// All positive-probability episode outcomes of `(policy, level)`, merged by
/// trajectory (branches that share an observation/action history pool their
/// probability; the return is the probability-weighted mean).
pub fn enumerate_outcomes(
    policy: &TabularPolicy,
    level: &Level,
    upomdp: &Upomdp,
) -> Result<Vec<Outcome>> {
    let dynamics = upomdp.dynamics_for(level)?;
    let mut merged: BTreeMap<Trajectory, (f64, f64)> = BTreeMap::new();
    visit_outcomes(
        policy,
        &dynamics,
        upomdp.horizon(),
        upomdp.discount(),
        upomdp.node_budget(),
        |traj, p, ret| {
            let e = merged.entry(traj.clone()).or_insert((0.0, 0.0));
            e.0 += p;
            e.1 += p * ret;
        },
    )?;
    Ok(merged
        .into_iter()
        .map(|(trajectory, (probability, weighted))| Outcome {
            trajectory,
            probability,
            ret: weighted / probability,
        })
        .collect())
}

/// The prefix-closed set of trajectories with strictly positive probability
/// under `policy` on some level of `levels`. An empty level set yields the
/// empty set.
pub fn realisable_trajectories(
    policy: &TabularPolicy,
    levels: &[Level],
    upomdp: &Upomdp,
) -> Result<RealisableSet> {
    let mut set = BTreeSet::new();
    for level in levels {
        let dynamics = upomdp.dynamics_for(level)?;
        // Every node of the branch walk is itself a realisable prefix, so
        // collecting per-node trajectories yields a prefix-closed set.
        let mut collect = |traj: &Trajectory| {
            if !set.contains(traj) {
                set.insert(traj.clone());
            }
        };
        visit_prefixes(
            policy,
            &dynamics,
            upomdp.horizon(),
            upomdp.node_budget(),
            &mut collect,
        )?;
    }
    Ok(RealisableSet::from_parts(
        set,
        levels.iter().map(|l| l.id).collect(),
    ))
}

/// Visit every realisable prefix (not just episode ends).
fn visit_prefixes<F: FnMut(&Trajectory)>(
    policy: &TabularPolicy,
    dynamics: &LevelDynamics,
    horizon: usize,
    budget: usize,
    visit: &mut F,
) -> Result<()> {
    struct Rec<'a, F: FnMut(&Trajectory)> {
        dynamics: &'a LevelDynamics,
        policy: &'a TabularPolicy,
        horizon: usize,
        budget: usize,
        nodes: usize,
        visit: &'a mut F,
    }
    impl<'a, F: FnMut(&Trajectory)> Rec<'a, F> {
        fn go(&mut self, state: usize, traj: Trajectory, t: usize) -> Result<()> {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExceeded {
                    nodes: self.nodes,
                    budget: self.budget,
                });
            }
            (self.visit)(&traj);
            if self.dynamics.terminal[state] || t == self.horizon {
                return Ok(());
            }
            let probs = self.policy.probs(&traj).into_owned();
            for (action, &pa) in probs.iter().enumerate() {
                if pa <= 0.0 {
                    continue;
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
        dynamics,
        policy,
        horizon,
        budget,
        nodes: 0,
        visit,
    };
    for (state, p0) in dynamics.initial.clone() {
        if p0 <= 0.0 {
            continue;
        }
        let traj = Trajectory::root(dynamics.obs[state]);
        rec.go(state, traj, 0)?;
    }
    Ok(())
}

/// How much of a trajectory is realisable under `(policy, levels)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Overlap {
    /// The entire trajectory is realisable.
    Complete,
    /// Some proper nonempty prefix is realisable.
    Partial,
    /// Not even the first observation matches.
    None,
}

/// Classify `trajectory` against the realisable set of `(policy, levels)`.
///
/// The divergence index is the first step `t` whose prefix (ending in the
/// t-th observation) is not realisable — equivalently the number of leading
/// realisable prefixes — capped at the trajectory length for complete
/// overlap. A divergence index of 0 means even `<o0>` is unrealisable.
pub fn trajectory_overlap(
    trajectory: &Trajectory,
    policy: &TabularPolicy,
    levels: &[Level],
    upomdp: &Upomdp,
) -> Result<(Overlap, usize)> {
    let set = realisable_trajectories(policy, levels, upomdp)?;
    Ok(classify_against_set(trajectory, &set))
}

/// Same classification against a precomputed realisable set.
pub fn classify_against_set(trajectory: &Trajectory, set: &RealisableSet) -> (Overlap, usize) {
    let mut matched = 0usize;
    for t in 0..=trajectory.len() {
        if set.contains(&trajectory.prefix(t)) {
            matched = t + 1;
        } else {
            break;
        }
    }
    if matched == trajectory.len() + 1 {
        (Overlap::Complete, trajectory.len())
    } else if matched > 0 {
        (Overlap::Partial, matched)
    } else {
        (Overlap::None, 0)
    }
}

/// One sampled episode.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub ret: f64,
    /// Per-step `(key, action, reward)`; `key` is the trajectory prefix the
    /// action was conditioned on.
    pub steps: Vec<(Trajectory, ActionId, f64)>,
}

/// Sample one seeded episode of `policy` on `dynamics`.
pub fn sample_rollout(
    policy: &TabularPolicy,
    dynamics: &LevelDynamics,
    horizon: usize,
    discount: f64,
    rng: &mut ChaCha8Rng,
) -> Rollout {
    let mut state = sample_indexed(&dynamics.initial, rng);
    let mut traj = Trajectory::root(dynamics.obs[state]);
    let mut ret = 0.0;
    let mut steps = Vec::new();
    for t in 0..horizon {
        if dynamics.terminal[state] {
            break;
        }
        let probs = policy.probs(&traj);
        let action = sample_dist(&probs, rng);
        let reward = dynamics.reward(state, action);
        ret += discount.powi(t as i32) * reward;
        steps.push((traj.clone(), action, reward));
        state = sample_indexed(dynamics.transition(state, action), rng);
        traj = traj.extend(action, dynamics.obs[state]);
    }
    Rollout {
        trajectory: traj,
        ret,
        steps,
    }
}

fn sample_indexed(dist: &[(usize, f64)], rng: &mut ChaCha8Rng) -> usize {
    if dist.len() == 1 {
        return dist[0].0;
    }
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for &(s, p) in dist {
        acc += p;
        if x < acc {
            return s;
        }
    }
    dist.last().expect("non-empty distribution").0
}

fn sample_dist(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::upomdp::{DefaultRule, Obs};
    use rand_chacha::rand_core::SeedableRng;

    /// A two-level, one-step bandit family: level 0 rewards action 0, level 1
    /// rewards action 1; both levels share the initial observation.
    fn shared_obs_bandit() -> Upomdp {
        let mk = |good: usize| LevelDynamics {
            state_count: 2,
            action_count: 2,
            initial: vec![(0, 1.0)],
            obs: vec![Obs(10), Obs(99)],
            transitions: vec![vec![(1, 1.0)], vec![(1, 1.0)], vec![], vec![]],
            rewards: vec![
                if good == 0 { 1.0 } else { -1.0 },
                if good == 1 { 1.0 } else { -1.0 },
                0.0,
                0.0,
            ],
            terminal: vec![false, true],
        };
        Upomdp::new(
            2,
            "bandit-obs",
            1,
            1.0,
            vec![
                (Level::with_id(0, "bandit", serde_json::json!({"good": 0})), mk(0)),
                (Level::with_id(1, "bandit", serde_json::json!({"good": 1})), mk(1)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_policy_yields_single_outcome() {
        let upomdp = shared_obs_bandit();
        let mut policy = TabularPolicy::uniform(2);
        policy
            .set(Trajectory::root(Obs(10)), vec![1.0, 0.0])
            .unwrap();
        let outs = enumerate_outcomes(&policy, &upomdp.levels()[0], &upomdp).unwrap();
        assert_eq!(outs.len(), 1);
        assert_eq!(outs[0].probability, 1.0);
        assert_eq!(outs[0].ret, 1.0);
    }

    #[test]
    fn uniform_policy_expected_return() {
        let upomdp = shared_obs_bandit();
        let policy = TabularPolicy::uniform(2);
        let u = expected_return(&policy, &upomdp.levels()[0], &upomdp).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn outcome_probabilities_sum_to_one() {
        let upomdp = shared_obs_bandit();
        let policy = TabularPolicy::uniform(2);
        let outs = enumerate_outcomes(&policy, &upomdp.levels()[1], &upomdp).unwrap();
        let total: f64 = outs.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_probability_branches_are_not_realisable() {
        let upomdp = shared_obs_bandit();
        let mut policy = TabularPolicy::uniform(2);
        policy
            .set(Trajectory::root(Obs(10)), vec![0.0, 1.0])
            .unwrap();
        let set = realisable_trajectories(&policy, upomdp.levels(), &upomdp).unwrap();
        let blocked = Trajectory::root(Obs(10)).extend(0, Obs(99));
        let taken = Trajectory::root(Obs(10)).extend(1, Obs(99));
        assert!(!set.contains(&blocked));
        assert!(set.contains(&taken));
        assert!(set.is_prefix_closed());
    }

    #[test]
    fn empty_level_set_realisable_is_empty() {
        let upomdp = shared_obs_bandit();
        let policy = TabularPolicy::uniform(2);
        let set = realisable_trajectories(&policy, &[], &upomdp).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn level_outside_space_is_a_domain_error() {
        let upomdp = shared_obs_bandit();
        let policy = TabularPolicy::uniform(2);
        let foreign = Level::with_id(42, "bandit", serde_json::json!({"good": 0}));
        let err = expected_return(&policy, &foreign, &upomdp).unwrap_err();
        assert!(matches!(err, Error::LevelNotInSpace { id: 42 }));
    }

    #[test]
    fn overlap_classification() {
        let upomdp = shared_obs_bandit();
        let policy = TabularPolicy::uniform(2);
        let full = Trajectory::root(Obs(10)).extend(0, Obs(99));
        let (kind, idx) =
            trajectory_overlap(&full, &policy, upomdp.levels(), &upomdp).unwrap();
        assert_eq!(kind, Overlap::Complete);
        assert_eq!(idx, 1);

        let alien = Trajectory::root(Obs(77)).extend(0, Obs(99));
        let (kind, idx) =
            trajectory_overlap(&alien, &policy, upomdp.levels(), &upomdp).unwrap();
        assert_eq!(kind, Overlap::None);
        assert_eq!(idx, 0);

        let diverged = Trajectory::root(Obs(10)).extend(0, Obs(42));
        let (kind, idx) =
            trajectory_overlap(&diverged, &policy, upomdp.levels(), &upomdp).unwrap();
        assert_eq!(kind, Overlap::Partial);
        assert_eq!(idx, 1);
    }

    #[test]
    fn sampled_mean_tracks_expected_return() {
        let upomdp = shared_obs_bandit();
        let mut policy = TabularPolicy::with_default(2, DefaultRule::Fixed(vec![0.25, 0.75]))
            .unwrap();
        policy
            .set(Trajectory::root(Obs(10)), vec![0.25, 0.75])
            .unwrap();
        let level = &upomdp.levels()[1];
        let exact = expected_return(&policy, level, &upomdp).unwrap();
        let dynamics = upomdp.dynamics_for(level).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let r = sample_rollout(&policy, &dynamics, 1, 1.0, &mut rng).ret;
            sum += r;
            sumsq += r * r;
        }
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * se.max(1e-12),
            "mean {mean} vs exact {exact} (se {se})"
        );
    }

    #[test]
    fn node_budget_is_enforced() {
        let upomdp = shared_obs_bandit().with_node_budget(1);
        let policy = TabularPolicy::uniform(2);
        let err = enumerate_outcomes(&policy, &upomdp.levels()[0], &upomdp).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }
}
