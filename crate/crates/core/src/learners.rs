//! Tabular actor-critic learning dynamics for agent and bandit adversary.
//!
//! The one-step loops reproduce the bandit-style training dynamics: the
//! adversary is an N-arm bandit over levels updated with exact regret as its
//! reward (sampled arms), while the agent's policy-gradient update is taken
//! in exact expectation over the adversary's distribution, which removes
//! agent-side sampling variance.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::enumeration::sample_rollout;
use crate::error::{Error, Result};
use crate::rng::{fnv1a, substream};
use crate::upomdp::{ActionId, Level, LevelDynamics, Obs, TabularPolicy, Trajectory, Upomdp};

/// Actor-critic hyperparameters. The defaults are the one-step tabular
/// settings: policy learning rate 0.01, value learning rate 1.0 (the
/// baseline tracks the last target), entropy coefficient 0.1, discount 0.95.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcParams {
    pub policy_lr: f64,
    pub value_lr: f64,
    pub entropy_coeff: f64,
    pub discount: f64,
}

impl Default for AcParams {
    fn default() -> Self {
        AcParams {
            policy_lr: 0.01,
            value_lr: 1.0,
            entropy_coeff: 0.1,
            discount: 0.95,
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// d/d logits of the policy entropy: -p_k (log p_k + H).
fn entropy_gradient(probs: &[f64]) -> Vec<f64> {
    let h: f64 = -probs
        .iter()
        .map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 })
        .sum::<f64>();
    probs
        .iter()
        .map(|&p| if p > 0.0 { -p * (p.ln() + h) } else { 0.0 })
        .collect()
}

/// Softmax policy logits and value estimates keyed by trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorCriticState {
    action_count: usize,
    pub params: AcParams,
    logits: BTreeMap<Trajectory, Vec<f64>>,
    values: BTreeMap<Trajectory, f64>,
}

impl ActorCriticState {
    pub fn new(action_count: usize, params: AcParams) -> Self {
        ActorCriticState {
            action_count,
            params,
            logits: BTreeMap::new(),
            values: BTreeMap::new(),
        }
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Softmax action probabilities at `key` (uniform for unseen keys).
    pub fn probs(&self, key: &Trajectory) -> Vec<f64> {
        match self.logits.get(key) {
            Some(z) => softmax(z),
            None => vec![1.0 / self.action_count as f64; self.action_count],
        }
    }

    pub fn value(&self, key: &Trajectory) -> f64 {
        self.values.get(key).copied().unwrap_or(0.0)
    }

    pub fn logits(&self, key: &Trajectory) -> Option<&[f64]> {
        self.logits.get(key).map(|v| v.as_slice())
    }

    /// Snapshot the current softmax policy as a tabular policy (unseen keys
    /// fall back to its uniform default, matching `probs`).
    pub fn policy(&self) -> TabularPolicy {
        let mut policy = TabularPolicy::uniform(self.action_count);
        for (key, z) in &self.logits {
            policy
                .set(key.clone(), softmax(z))
                .expect("softmax is a valid distribution");
        }
        policy
    }

    /// One sampled-action policy-gradient step plus a value step toward the
    /// target (`advantage` = target - value). Returns the updated state.
    pub fn ac_update(
        &self,
        key: &Trajectory,
        action: ActionId,
        advantage: f64,
    ) -> Result<ActorCriticState> {
        let mut next = self.clone();
        next.ac_update_in_place(key, action, advantage)?;
        Ok(next)
    }

    pub fn ac_update_in_place(
        &mut self,
        key: &Trajectory,
        action: ActionId,
        advantage: f64,
    ) -> Result<()> {
        if !advantage.is_finite() {
            return Err(Error::NonFinite {
                context: "actor-critic advantage".into(),
            });
        }
        assert!(action < self.action_count);
        let params = self.params;
        let z = self
            .logits
            .entry(key.clone())
            .or_insert_with(|| vec![0.0; self.action_count]);
        let probs = softmax(z);
        let ent = entropy_gradient(&probs);
        for (i, zi) in z.iter_mut().enumerate() {
            let glog = if i == action { 1.0 - probs[i] } else { -probs[i] };
            *zi += params.policy_lr * (advantage * glog + params.entropy_coeff * ent[i]);
        }
        let v = self.values.entry(key.clone()).or_insert(0.0);
        *v += params.value_lr * advantage;
        Ok(())
    }

    /// Exact expected policy-gradient step at `key` against per-action
    /// values `q`, scaled by the key's visitation mass.
    pub fn expected_update_in_place(&mut self, key: &Trajectory, q: &[f64], mass: f64) {
        assert_eq!(q.len(), self.action_count);
        if mass <= 0.0 {
            return;
        }
        let params = self.params;
        let value = self.value(key);
        let z = self
            .logits
            .entry(key.clone())
            .or_insert_with(|| vec![0.0; self.action_count]);
        let probs = softmax(z);
        let ent = entropy_gradient(&probs);
        let v_target: f64 = probs.iter().zip(q).map(|(&p, &qa)| p * qa).sum();
        for i in 0..probs.len() {
            let mut grad = 0.0;
            for a in 0..probs.len() {
                let glog = if i == a { 1.0 - probs[i] } else { -probs[i] };
                grad += probs[a] * (q[a] - value) * glog;
            }
            z[i] += params.policy_lr * mass * (grad + params.entropy_coeff * ent[i]);
        }
        let v = self.values.entry(key.clone()).or_insert(0.0);
        *v += params.value_lr * mass * (v_target - value);
    }

    /// Stable hash of all parameters (logits and values, bit-exact).
    pub fn param_hash(&self) -> u64 {
        let mut bytes = Vec::new();
        for (key, z) in &self.logits {
            push_trajectory(&mut bytes, key);
            for x in z {
                bytes.extend_from_slice(&x.to_bits().to_le_bytes());
            }
        }
        bytes.push(0xfe);
        for (key, v) in &self.values {
            push_trajectory(&mut bytes, key);
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        fnv1a(&bytes)
    }

    /// Hash restricted to keys matched by `filter`.
    pub fn param_hash_filtered(&self, mut filter: impl FnMut(&Trajectory) -> bool) -> u64 {
        let mut bytes = Vec::new();
        for (key, z) in &self.logits {
            if !filter(key) {
                continue;
            }
            push_trajectory(&mut bytes, key);
            for x in z {
                bytes.extend_from_slice(&x.to_bits().to_le_bytes());
            }
        }
        fnv1a(&bytes)
    }
}

fn push_trajectory(bytes: &mut Vec<u8>, t: &Trajectory) {
    bytes.push(0xff);
    for o in t.observations() {
        bytes.extend_from_slice(&o.0.to_le_bytes());
    }
    for &a in t.actions() {
        bytes.extend_from_slice(&(a as u64).to_le_bytes());
    }
}

/// One step of a sampled training episode.
#[derive(Clone, Debug)]
pub struct EpisodeStep {
    pub key: Trajectory,
    pub action: ActionId,
    pub reward: f64,
    pub value_estimate: f64,
}

/// A sampled episode with the per-step data needed for updates and scoring.
#[derive(Clone, Debug)]
pub struct EpisodeRecord {
    pub trajectory: Trajectory,
    pub ret: f64,
    pub steps: Vec<EpisodeStep>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UpdateSummary {
    pub updated_steps: usize,
    pub masked_steps: usize,
}

/// A trainable agent: episode rollouts plus (maskable) parameter updates.
pub trait AgentTrainer {
    fn policy(&self) -> TabularPolicy;
    fn action_count(&self) -> usize;
    fn rollout(
        &self,
        dynamics: &LevelDynamics,
        horizon: usize,
        discount: f64,
        rng: &mut ChaCha8Rng,
    ) -> EpisodeRecord;
    /// Apply the episode's learning signal to steps at index >= `from_step`.
    fn apply_update(&mut self, episode: &EpisodeRecord, from_step: usize) -> Result<UpdateSummary>;
    fn param_hash(&self) -> u64;
}

/// Monte-Carlo-return actor-critic trainer over trajectory keys.
#[derive(Clone, Debug)]
pub struct TabularAcTrainer {
    pub state: ActorCriticState,
}

impl TabularAcTrainer {
    pub fn new(action_count: usize, params: AcParams) -> Self {
        TabularAcTrainer {
            state: ActorCriticState::new(action_count, params),
        }
    }
}

impl AgentTrainer for TabularAcTrainer {
    fn policy(&self) -> TabularPolicy {
        self.state.policy()
    }

    fn action_count(&self) -> usize {
        self.state.action_count()
    }

    fn rollout(
        &self,
        dynamics: &LevelDynamics,
        horizon: usize,
        discount: f64,
        rng: &mut ChaCha8Rng,
    ) -> EpisodeRecord {
        let policy = self.state.policy();
        let rollout = sample_rollout(&policy, dynamics, horizon, discount, rng);
        let steps = rollout
            .steps
            .iter()
            .map(|(key, action, reward)| EpisodeStep {
                key: key.clone(),
                action: *action,
                reward: *reward,
                value_estimate: self.state.value(key),
            })
            .collect();
        EpisodeRecord {
            trajectory: rollout.trajectory,
            ret: rollout.ret,
            steps,
        }
    }

    fn apply_update(&mut self, episode: &EpisodeRecord, from_step: usize) -> Result<UpdateSummary> {
        if from_step > episode.steps.len() {
            return Err(Error::IndexOutOfRange {
                index: from_step,
                len: episode.steps.len(),
            });
        }
        // Monte Carlo return from each step, in the step's own frame.
        let discount = self.state.params.discount;
        let mut returns = vec![0.0; episode.steps.len()];
        let mut acc = 0.0;
        for t in (0..episode.steps.len()).rev() {
            acc = episode.steps[t].reward + discount * acc;
            returns[t] = acc;
        }
        let mut summary = UpdateSummary {
            updated_steps: 0,
            masked_steps: from_step,
        };
        for (t, step) in episode.steps.iter().enumerate().skip(from_step) {
            let advantage = returns[t] - self.state.value(&step.key);
            self.state
                .ac_update_in_place(&step.key, step.action, advantage)?;
            summary.updated_steps += 1;
        }
        Ok(summary)
    }

    fn param_hash(&self) -> u64 {
        self.state.param_hash()
    }
}

/// Per-iteration record of the one-step training loops.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Which training phase (outer adversary) produced this record.
    pub phase: usize,
    /// Adversary sampling probabilities, aligned to the loop's level list
    /// (zero for levels outside the current menu).
    pub adversary_probs: Vec<f64>,
    /// Exact regret of the current agent on every level.
    pub per_level_regret: Vec<f64>,
    pub policy: TabularPolicy,
}

#[derive(Clone, Debug)]
pub struct PairedHistory {
    pub levels: Vec<Level>,
    pub records: Vec<IterationRecord>,
}

impl PairedHistory {
    /// Worst regret per distinct initial observation at the final record.
    pub fn final_per_obs_regret(&self, upomdp: &Upomdp) -> Result<BTreeMap<Obs, f64>> {
        let last = self.records.last().expect("history is nonempty");
        let mut out: BTreeMap<Obs, f64> = BTreeMap::new();
        for (level, &r) in self.levels.iter().zip(&last.per_level_regret) {
            let obs = single_initial_obs(upomdp, level)?;
            let e = out.entry(obs).or_insert(f64::NEG_INFINITY);
            *e = e.max(r);
        }
        Ok(out)
    }
}

/// Loop hyperparameters; `updates_per_side` alternates that many adversary
/// updates with that many agent updates per iteration.
#[derive(Clone, Debug)]
pub struct PairedLoopConfig {
    pub iterations: usize,
    pub updates_per_side: usize,
    pub agent: AcParams,
    pub adversary: AcParams,
    /// Probability mass above which a level counts as adversary support when
    /// the multi-phase loop retires observations.
    pub support_threshold: f64,
}

impl Default for PairedLoopConfig {
    fn default() -> Self {
        PairedLoopConfig {
            iterations: 8000,
            updates_per_side: 5,
            agent: AcParams::default(),
            adversary: AcParams::default(),
            support_threshold: 0.1,
        }
    }
}

/// A level's one-step table: initial state mass and per-action rewards
/// grouped by root observation, plus the exact optimum.
struct OneStepLevel {
    /// (root obs, mass, per-action expected reward conditioned on the group)
    groups: Vec<(Obs, f64, Vec<f64>)>,
    optimal: f64,
}

fn one_step_table(upomdp: &Upomdp, level: &Level) -> Result<OneStepLevel> {
    if upomdp.horizon() != 1 {
        return Err(Error::Unsupported(
            "bandit training loops require one-step environments".into(),
        ));
    }
    let dynamics = upomdp.dynamics_for(level)?;
    let mut by_obs: BTreeMap<Obs, (f64, Vec<f64>)> = BTreeMap::new();
    for &(s, p) in &dynamics.initial {
        if p <= 0.0 {
            continue;
        }
        let entry = by_obs
            .entry(dynamics.obs[s])
            .or_insert_with(|| (0.0, vec![0.0; upomdp.action_count()]));
        entry.0 += p;
        for a in 0..upomdp.action_count() {
            entry.1[a] += p * dynamics.reward(s, a);
        }
    }
    let mut optimal = 0.0;
    let mut groups = Vec::with_capacity(by_obs.len());
    for (obs, (mass, weighted)) in by_obs {
        optimal += weighted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rewards = weighted.iter().map(|w| w / mass).collect();
        groups.push((obs, mass, rewards));
    }
    Ok(OneStepLevel { groups, optimal })
}

fn single_initial_obs(upomdp: &Upomdp, level: &Level) -> Result<Obs> {
    let table = one_step_table(upomdp, level)?;
    if table.groups.len() != 1 {
        return Err(Error::Unsupported(
            "level has more than one initial observation".into(),
        ));
    }
    Ok(table.groups[0].0)
}

fn exact_regret(table: &OneStepLevel, state: &ActorCriticState) -> f64 {
    let mut u = 0.0;
    for (obs, mass, rewards) in &table.groups {
        let probs = state.probs(&Trajectory::root(*obs));
        u += mass * probs.iter().zip(rewards).map(|(&p, &r)| p * r).sum::<f64>();
    }
    table.optimal - u
}

struct InnerLoop<'a> {
    levels: &'a [Level],
    tables: &'a [OneStepLevel],
    menu: Vec<usize>,
    frozen_keys: &'a BTreeSet<Trajectory>,
    cfg: &'a PairedLoopConfig,
}

impl<'a> InnerLoop<'a> {
    /// Run the paired adversary/agent updates; returns the adversary's final
    /// sampling distribution over the menu.
    fn run(
        &self,
        agent: &mut ActorCriticState,
        rng: &mut ChaCha8Rng,
        phase: usize,
        history: &mut Vec<IterationRecord>,
    ) -> Vec<f64> {
        let m = self.menu.len();
        let mut adv_logits = vec![0.0f64; m];
        let mut adv_value = 0.0f64;
        let adv = self.cfg.adversary;
        for it in 0..self.cfg.iterations {
            // Adversary: sampled bandit updates, reward = exact regret.
            for _ in 0..self.cfg.updates_per_side {
                let probs = softmax(&adv_logits);
                let arm = sample_index(&probs, rng);
                let reward = exact_regret(&self.tables[self.menu[arm]], agent);
                let advantage = reward - adv_value;
                let ent = entropy_gradient(&probs);
                for i in 0..m {
                    let glog = if i == arm { 1.0 - probs[i] } else { -probs[i] };
                    adv_logits[i] +=
                        adv.policy_lr * (advantage * glog + adv.entropy_coeff * ent[i]);
                }
                adv_value += adv.value_lr * advantage;
            }
            // Agent: exact expected updates over the adversary distribution.
            let lambda = softmax(&adv_logits);
            for _ in 0..self.cfg.updates_per_side {
                self.agent_expected_update(agent, &lambda);
            }
            let per_level_regret: Vec<f64> =
                self.tables.iter().map(|t| exact_regret(t, agent)).collect();
            history.push(IterationRecord {
                iteration: it,
                phase,
                adversary_probs: self.expand(&lambda),
                per_level_regret,
                policy: agent.policy(),
            });
        }
        softmax(&adv_logits)
    }

    fn agent_expected_update(&self, agent: &mut ActorCriticState, lambda: &[f64]) {
        // Group the adversary's mass by root observation.
        let mut by_key: BTreeMap<Obs, Vec<(usize, f64, usize)>> = BTreeMap::new();
        for (arm, &li) in self.menu.iter().enumerate() {
            for (gi, (obs, mass, _)) in self.tables[li].groups.iter().enumerate() {
                by_key
                    .entry(*obs)
                    .or_default()
                    .push((li, lambda[arm] * mass, gi));
            }
        }
        for (obs, members) in by_key {
            let key = Trajectory::root(obs);
            if self.frozen_keys.contains(&key) {
                continue;
            }
            let mass: f64 = members.iter().map(|&(_, w, _)| w).sum();
            if mass <= 0.0 {
                continue;
            }
            // Reward = negative regret, in expectation over the posterior of
            // levels consistent with this observation.
            let mut q = vec![0.0; agent.action_count()];
            for &(li, w, gi) in &members {
                let table = &self.tables[li];
                let rewards = &table.groups[gi].2;
                for (qa, &r) in q.iter_mut().zip(rewards) {
                    *qa += (w / mass) * (r - table.optimal);
                }
            }
            agent.expected_update_in_place(&key, &q, mass);
        }
    }

    fn expand(&self, lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.levels.len()];
        for (arm, &li) in self.menu.iter().enumerate() {
            out[li] = lambda[arm];
        }
        out
    }
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
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

/// The one-adversary training loop: a bandit adversary over `levels` trained
/// with exact regret, against an agent updated in expectation with negative
/// regret as its reward.
pub fn paired_perfect_regret_loop(
    upomdp: &Upomdp,
    levels: &[Level],
    cfg: &PairedLoopConfig,
    seed: u64,
) -> Result<PairedHistory> {
    let tables: Vec<OneStepLevel> = levels
        .iter()
        .map(|l| one_step_table(upomdp, l))
        .collect::<Result<_>>()?;
    let mut agent = ActorCriticState::new(upomdp.action_count(), cfg.agent);
    let mut rng = substream(seed, "tabular-loop");
    let frozen = BTreeSet::new();
    let mut records = Vec::with_capacity(cfg.iterations);
    let inner = InnerLoop {
        levels,
        tables: &tables,
        menu: (0..levels.len()).collect(),
        frozen_keys: &frozen,
        cfg,
    };
    inner.run(&mut agent, &mut rng, 0, &mut records);
    Ok(PairedHistory {
        levels: levels.to_vec(),
        records,
    })
}

/// One retired adversary phase of the multi-adversary loop.
#[derive(Clone, Debug)]
pub struct AdversaryPhase {
    pub menu_ids: Vec<u64>,
    pub final_distribution: Vec<f64>,
    pub support_ids: Vec<u64>,
    pub retired_obs: Vec<Obs>,
}

#[derive(Clone, Debug)]
pub struct RemidiTabularOutcome {
    pub history: PairedHistory,
    pub phases: Vec<AdversaryPhase>,
    /// Why the loop stopped before exhausting the level space, if it did.
    pub ended_early: Option<String>,
}

/// The multi-adversary loop: each successive adversary's menu excludes every
/// level whose initial observation appeared in a previous adversary's
/// support, and agent updates skip the retired (frozen) observation keys.
pub fn remidi_tabular_loop(
    upomdp: &Upomdp,
    levels: &[Level],
    cfg: &PairedLoopConfig,
    seed: u64,
) -> Result<RemidiTabularOutcome> {
    let tables: Vec<OneStepLevel> = levels
        .iter()
        .map(|l| one_step_table(upomdp, l))
        .collect::<Result<_>>()?;
    let obs_of: Vec<Obs> = levels
        .iter()
        .map(|l| single_initial_obs(upomdp, l))
        .collect::<Result<_>>()?;
    let mut agent = ActorCriticState::new(upomdp.action_count(), cfg.agent);
    let mut rng = substream(seed, "tabular-loop");
    let mut excluded_obs: BTreeSet<Obs> = BTreeSet::new();
    let mut frozen_keys: BTreeSet<Trajectory> = BTreeSet::new();
    let mut records = Vec::new();
    let mut phases = Vec::new();
    let mut ended_early = None;
    for phase in 0.. {
        let menu: Vec<usize> = (0..levels.len())
            .filter(|&i| !excluded_obs.contains(&obs_of[i]))
            .collect();
        if menu.is_empty() {
            break;
        }
        let inner = InnerLoop {
            levels,
            tables: &tables,
            menu: menu.clone(),
            frozen_keys: &frozen_keys,
            cfg,
        };
        let lambda = inner.run(&mut agent, &mut rng, phase, &mut records);
        let support: Vec<usize> = menu
            .iter()
            .enumerate()
            .filter(|&(arm, _)| lambda[arm] > cfg.support_threshold)
            .map(|(_, &li)| li)
            .collect();
        if support.is_empty() {
            ended_early = Some(format!(
                "phase {phase}: no level above the support threshold"
            ));
            break;
        }
        let mut retired = Vec::new();
        for &li in &support {
            if excluded_obs.insert(obs_of[li]) {
                retired.push(obs_of[li]);
                frozen_keys.insert(Trajectory::root(obs_of[li]));
            }
        }
        phases.push(AdversaryPhase {
            menu_ids: menu.iter().map(|&i| levels[i].id).collect(),
            final_distribution: lambda,
            support_ids: support.iter().map(|&i| levels[i].id).collect(),
            retired_obs: retired,
        });
    }
    Ok(RemidiTabularOutcome {
        history: PairedHistory {
            levels: levels.to_vec(),
            records,
        },
        phases,
        ended_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::tabular::{ObservationPairing, TabularGameEnv};

    #[test]
    fn zero_advantage_zero_entropy_leaves_logits_unchanged() {
        let params = AcParams {
            entropy_coeff: 0.0,
            ..AcParams::default()
        };
        let state = ActorCriticState::new(3, params);
        let key = Trajectory::root(Obs(1));
        let next = state.ac_update(&key, 1, 0.0).unwrap();
        assert_eq!(next.probs(&key), state.probs(&key));
    }

    #[test]
    fn positive_advantage_raises_action_probability() {
        let state = ActorCriticState::new(2, AcParams::default());
        let key = Trajectory::root(Obs(1));
        let next = state.ac_update(&key, 0, 1.0).unwrap();
        assert!(next.probs(&key)[0] > state.probs(&key)[0]);
    }

    #[test]
    fn repeated_positive_advantage_is_monotone() {
        let params = AcParams {
            policy_lr: 0.1,
            value_lr: 0.0,
            entropy_coeff: 0.0,
            discount: 1.0,
        };
        let mut state = ActorCriticState::new(2, params);
        let key = Trajectory::root(Obs(7));
        let mut last = state.probs(&key)[0];
        for _ in 0..500 {
            state = state.ac_update(&key, 0, 1.0).unwrap();
            let p = state.probs(&key)[0];
            assert!(p > last);
            last = p;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn non_finite_advantage_is_an_error() {
        let state = ActorCriticState::new(2, AcParams::default());
        let key = Trajectory::root(Obs(1));
        assert!(state.ac_update(&key, 0, f64::NAN).is_err());
    }

    #[test]
    fn zero_learning_rates_freeze_the_history() {
        let env = TabularGameEnv::new(ObservationPairing::Paired);
        let upomdp = env.upomdp();
        let frozen = AcParams {
            policy_lr: 0.0,
            value_lr: 0.0,
            entropy_coeff: 0.0,
            discount: 0.95,
        };
        let cfg = PairedLoopConfig {
            iterations: 20,
            agent: frozen,
            adversary: frozen,
            ..PairedLoopConfig::default()
        };
        let history = paired_perfect_regret_loop(&upomdp, &env.eval_suite(), &cfg, 3).unwrap();
        let first = &history.records[0];
        for record in &history.records {
            assert_eq!(record.adversary_probs, first.adversary_probs);
            assert_eq!(record.per_level_regret, first.per_level_regret);
        }
    }

    #[test]
    fn identical_seeds_identical_histories() {
        let env = TabularGameEnv::new(ObservationPairing::Paired);
        let upomdp = env.upomdp();
        let cfg = PairedLoopConfig {
            iterations: 50,
            ..PairedLoopConfig::default()
        };
        let a = paired_perfect_regret_loop(&upomdp, &env.eval_suite(), &cfg, 11).unwrap();
        let b = paired_perfect_regret_loop(&upomdp, &env.eval_suite(), &cfg, 11).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.adversary_probs, rb.adversary_probs);
            assert_eq!(ra.per_level_regret, rb.per_level_regret);
        }
    }

    #[test]
    fn adversary_rewards_are_bounded_by_regret_range() {
        let env = TabularGameEnv::new(ObservationPairing::Paired);
        let upomdp = env.upomdp();
        let cfg = PairedLoopConfig {
            iterations: 200,
            ..PairedLoopConfig::default()
        };
        let history = paired_perfect_regret_loop(&upomdp, &env.eval_suite(), &cfg, 5).unwrap();
        for record in &history.records {
            for &r in &record.per_level_regret {
                assert!((-1e-9..=2.0 + 1e-9).contains(&r));
            }
        }
    }

    #[test]
    fn frozen_keys_stay_bit_identical_across_later_phases() {
        let env = TabularGameEnv::new(ObservationPairing::Paired);
        let upomdp = env.upomdp();
        let cfg = PairedLoopConfig {
            iterations: 400,
            ..PairedLoopConfig::default()
        };
        let outcome = remidi_tabular_loop(&upomdp, &env.eval_suite(), &cfg, 17).unwrap();
        assert!(outcome.phases.len() >= 2, "expected at least two phases");
        let retired = &outcome.phases[0].retired_obs;
        assert!(!retired.is_empty());
        let phase0_last = outcome
            .history
            .records
            .iter()
            .filter(|r| r.phase == 0)
            .next_back()
            .unwrap()
            .clone();
        for record in outcome.history.records.iter().filter(|r| r.phase > 0) {
            for obs in retired {
                let key = Trajectory::root(*obs);
                assert_eq!(
                    record.policy.probs(&key).into_owned(),
                    phase0_last.policy.probs(&key).into_owned()
                );
            }
        }
    }
}
