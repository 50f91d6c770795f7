//! Finite underspecified POMDPs: levels, trajectories, and
//! trajectory-conditioned policies.
//!
//! A [`Upomdp`] is a family of finite POMDPs sharing an action space, horizon
//! and discount; each [`Level`] selects one member. Partial observability
//! arises from distinct states (and distinct levels) emitting the same
//! observation token. All types are immutable after construction and safe to
//! share across threads.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for distribution normalization checks.
pub const DIST_TOL: f64 = 1e-12;

/// An opaque, comparable observation token. Environment families own the
/// encoding; the library only compares tokens for equality and order.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize, Default,
)]
pub struct Obs(pub u64);

/// Index into the shared action space.
pub type ActionId = usize;

/// One concrete POMDP instance from the level space.
///
/// `id` is a stable integer identity, unique within a level space. `params`
/// is the family-specific parameter record; it round-trips through JSON
/// exactly (families only store integers, booleans and strings in it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub id: u64,
    pub family: String,
    pub params: serde_json::Value,
}

impl Level {
    pub fn new(family: impl Into<String>, params: serde_json::Value) -> Self {
        let family = family.into();
        let id = level_id(&family, &params);
        Level { id, family, params }
    }

    /// Construct with an explicit id (for fixed enumerated spaces).
    pub fn with_id(id: u64, family: impl Into<String>, params: serde_json::Value) -> Self {
        Level {
            id,
            family: family.into(),
            params,
        }
    }
}

/// Stable id for a level: FNV-1a over the family tag and canonical JSON of
/// the params (serde_json maps are ordered, so serialization is canonical).
pub fn level_id(family: &str, params: &serde_json::Value) -> u64 {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(family.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(params.to_string().as_bytes());
    crate::rng::fnv1a(&bytes)
}

/// An alternating observation/action history, always ending in an
/// observation. Equality is structural: two trajectories with identical
/// entries are the same key.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Trajectory {
    obs: Vec<Obs>,
    actions: Vec<ActionId>,
}

impl Trajectory {
    /// The one-observation trajectory `<o0>`.
    pub fn root(o0: Obs) -> Self {
        Trajectory {
            obs: vec![o0],
            actions: Vec::new(),
        }
    }

    /// Extend by one `(action, observation)` step.
    pub fn extend(&self, action: ActionId, obs: Obs) -> Self {
        let mut t = self.clone();
        t.actions.push(action);
        t.obs.push(obs);
        t
    }

    /// Step count `t` (number of actions taken).
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn observations(&self) -> &[Obs] {
        &self.obs
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn last_obs(&self) -> Obs {
        *self.obs.last().expect("trajectory always holds an observation")
    }

    /// The prefix with `steps` actions (`steps + 1` observations).
    pub fn prefix(&self, steps: usize) -> Self {
        assert!(steps <= self.len());
        Trajectory {
            obs: self.obs[..=steps].to_vec(),
            actions: self.actions[..steps].to_vec(),
        }
    }

    /// All prefixes from `<o0>` up to the full trajectory.
    pub fn prefixes(&self) -> impl Iterator<Item = Trajectory> + '_ {
        (0..=self.len()).map(|t| self.prefix(t))
    }
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<o{}", self.obs[0].0)?;
        for (a, o) in self.actions.iter().zip(self.obs.iter().skip(1)) {
            write!(f, ",a{a},o{}", o.0)?;
        }
        write!(f, ">")
    }
}

/// Action distribution used for trajectory keys absent from a policy table.
#[derive(Clone, Debug, PartialEq)]
pub enum DefaultRule {
    /// Uniform over the action space (the symmetric total completion).
    Uniform,
    /// A fixed distribution.
    Fixed(Vec<f64>),
}

/// A trajectory-conditioned stochastic policy. Total over all trajectories:
/// keys absent from the table fall back to `default_rule`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    table: BTreeMap<Trajectory, Vec<f64>>,
    default_rule: DefaultRule,
    action_count: usize,
}

impl TabularPolicy {
    /// The all-uniform policy.
    pub fn uniform(action_count: usize) -> Self {
        TabularPolicy {
            table: BTreeMap::new(),
            default_rule: DefaultRule::Uniform,
            action_count,
        }
    }

    pub fn with_default(action_count: usize, default_rule: DefaultRule) -> Result<Self> {
        if let DefaultRule::Fixed(dist) = &default_rule {
            validate_distribution(dist, action_count)?;
        }
        Ok(TabularPolicy {
            table: BTreeMap::new(),
            default_rule,
            action_count,
        })
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    /// Insert or replace the distribution stored at `key`.
    pub fn set(&mut self, key: Trajectory, dist: Vec<f64>) -> Result<()> {
        validate_distribution(&dist, self.action_count)?;
        self.table.insert(key, dist);
        Ok(())
    }

    /// Remove an explicit entry, reverting the key to the default rule.
    pub fn unset(&mut self, key: &Trajectory) {
        self.table.remove(key);
    }

    /// The action distribution at `key` (default rule for unlisted keys).
    pub fn probs(&self, key: &Trajectory) -> Cow<'_, [f64]> {
        match self.table.get(key) {
            Some(dist) => Cow::Borrowed(dist.as_slice()),
            None => match &self.default_rule {
                DefaultRule::Uniform => {
                    Cow::Owned(vec![1.0 / self.action_count as f64; self.action_count])
                }
                DefaultRule::Fixed(dist) => Cow::Borrowed(dist.as_slice()),
            },
        }
    }

    pub fn prob(&self, key: &Trajectory, action: ActionId) -> f64 {
        self.probs(key)[action]
    }

    /// Whether `key` has an explicit table entry.
    pub fn has_entry(&self, key: &Trajectory) -> bool {
        self.table.contains_key(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Trajectory, &[f64])> {
        self.table.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// A deterministic trajectory-conditioned policy, stored as a partial table.
/// When used as a strategy in a refined game the table covers the free keys
/// only; behavior elsewhere comes from a base policy or the default rule.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DeterministicPolicy {
    pub table: BTreeMap<Trajectory, ActionId>,
}

impl DeterministicPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    /// A total tabular policy that plays this table deterministically and
    /// falls back to `base` on unlisted keys.
    pub fn overlay_on(&self, base: &TabularPolicy) -> TabularPolicy {
        let mut out = base.clone();
        for (key, &action) in &self.table {
            let mut dist = vec![0.0; base.action_count()];
            dist[action] = 1.0;
            out.set(key.clone(), dist).expect("one-hot distribution is valid");
        }
        out
    }
}

/// The prefix-closed set of trajectories realisable by following a policy on
/// any level of a given set.
#[derive(Clone, Debug, Default)]
pub struct RealisableSet {
    trajectories: BTreeSet<Trajectory>,
    pub source_levels: Vec<u64>,
}

impl RealisableSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub(crate) fn from_parts(trajectories: BTreeSet<Trajectory>, source_levels: Vec<u64>) -> Self {
        RealisableSet {
            trajectories,
            source_levels,
        }
    }

    pub fn contains(&self, t: &Trajectory) -> bool {
        self.trajectories.contains(t)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter()
    }

    /// Every prefix of a member is a member.
    pub fn is_prefix_closed(&self) -> bool {
        self.trajectories
            .iter()
            .all(|t| t.prefixes().all(|p| self.trajectories.contains(&p)))
    }
}

/// One level's finite dynamics: sparse initial distribution, per-state
/// observation token, per-(state, action) sparse transitions and reward,
/// and terminal flags. Distributions must sum to 1 within `DIST_TOL`.
#[derive(Clone, Debug)]
pub struct LevelDynamics {
    pub state_count: usize,
    pub action_count: usize,
    pub initial: Vec<(usize, f64)>,
    pub obs: Vec<Obs>,
    /// Indexed `state * action_count + action`.
    pub transitions: Vec<Vec<(usize, f64)>>,
    /// Indexed `state * action_count + action`.
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
}

impl LevelDynamics {
    pub fn validate(&self) -> Result<()> {
        if self.obs.len() != self.state_count
            || self.terminal.len() != self.state_count
            || self.transitions.len() != self.state_count * self.action_count
            || self.rewards.len() != self.state_count * self.action_count
        {
            return Err(Error::Unsupported(
                "dynamics table sizes inconsistent with state/action counts".into(),
            ));
        }
        check_distribution(&self.initial, self.state_count)?;
        for (s, term) in self.terminal.iter().enumerate() {
            if *term {
                continue;
            }
            for a in 0..self.action_count {
                check_distribution(&self.transitions[s * self.action_count + a], self.state_count)?;
            }
        }
        for r in &self.rewards {
            if !r.is_finite() {
                return Err(Error::NonFinite {
                    context: "reward table".into(),
                });
            }
        }
        Ok(())
    }

    pub fn transition(&self, state: usize, action: ActionId) -> &[(usize, f64)] {
        &self.transitions[state * self.action_count + action]
    }

    pub fn reward(&self, state: usize, action: ActionId) -> f64 {
        self.rewards[state * self.action_count + action]
    }

    /// True when the initial state and every transition are point masses.
    pub fn is_deterministic(&self) -> bool {
        self.initial.len() == 1
            && self.transitions.iter().all(|t| t.len() <= 1)
    }
}

fn check_distribution(dist: &[(usize, f64)], state_count: usize) -> Result<()> {
    let mut sum = 0.0;
    for &(s, p) in dist {
        if s >= state_count || !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution { sum: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution { sum });
    }
    Ok(())
}

pub(crate) fn validate_distribution(dist: &[f64], action_count: usize) -> Result<()> {
    if dist.len() != action_count {
        return Err(Error::Unsupported(format!(
            "distribution has {} entries, expected {}",
            dist.len(),
            action_count
        )));
    }
    let mut sum = 0.0;
    for &p in dist {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution { sum: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution { sum });
    }
    Ok(())
}

type DynamicsSource = dyn Fn(&Level) -> Result<LevelDynamics> + Send + Sync;

/// A finite underspecified POMDP.
///
/// Holds an explicit, ordered level space (used by exact solvers) with
/// eagerly validated dynamics. A `Upomdp` may additionally carry a dynamics
/// source so that levels outside the explicit list — but valid for the
/// family, e.g. freshly generated grid layouts — can still be evaluated.
#[derive(Clone)]
pub struct Upomdp {
    action_count: usize,
    observation_space: String,
    horizon: usize,
    discount: f64,
    levels: Vec<Level>,
    dynamics: Vec<Arc<LevelDynamics>>,
    index_by_id: BTreeMap<u64, usize>,
    source: Option<Arc<DynamicsSource>>,
    node_budget: usize,
}

/// Default enumeration node budget; converts silent blowups into errors.
pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

impl Upomdp {
    pub fn new(
        action_count: usize,
        observation_space: impl Into<String>,
        horizon: usize,
        discount: f64,
        levels: Vec<(Level, LevelDynamics)>,
    ) -> Result<Self> {
        assert!(action_count > 0, "action_count must be positive");
        assert!(horizon > 0, "horizon must be positive");
        assert!(
            discount > 0.0 && discount <= 1.0,
            "discount must lie in (0, 1]"
        );
        let mut lv = Vec::with_capacity(levels.len());
        let mut dy = Vec::with_capacity(levels.len());
        let mut index_by_id = BTreeMap::new();
        for (i, (level, dynamics)) in levels.into_iter().enumerate() {
            if dynamics.action_count != action_count {
                return Err(Error::Unsupported(format!(
                    "level {} dynamics declare {} actions, expected {}",
                    level.id, dynamics.action_count, action_count
                )));
            }
            dynamics.validate()?;
            if index_by_id.insert(level.id, i).is_some() {
                return Err(Error::Unsupported(format!(
                    "duplicate level id {} in level space",
                    level.id
                )));
            }
            lv.push(level);
            dy.push(Arc::new(dynamics));
        }
        Ok(Upomdp {
            action_count,
            observation_space: observation_space.into(),
            horizon,
            discount,
            levels: lv,
            dynamics: dy,
            index_by_id,
            source: None,
            node_budget: DEFAULT_NODE_BUDGET,
        })
    }

    /// Attach a dynamics source for levels outside the explicit list.
    pub fn with_source(
        mut self,
        source: impl Fn(&Level) -> Result<LevelDynamics> + Send + Sync + 'static,
    ) -> Self {
        self.source = Some(Arc::new(source));
        self
    }

    pub fn with_node_budget(mut self, budget: usize) -> Self {
        self.node_budget = budget;
        self
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn observation_space(&self) -> &str {
        &self.observation_space
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn node_budget(&self) -> usize {
        self.node_budget
    }

    /// The explicit, ordered level space.
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level_index(&self, level: &Level) -> Option<usize> {
        self.index_by_id.get(&level.id).copied()
    }

    /// Dynamics for `level`. Levels in the explicit space resolve to their
    /// prebuilt tables; others go through the source, which validates the
    /// parameters and errors for levels outside the family.
    pub fn dynamics_for(&self, level: &Level) -> Result<Arc<LevelDynamics>> {
        if let Some(&i) = self.index_by_id.get(&level.id) {
            return Ok(Arc::clone(&self.dynamics[i]));
        }
        match &self.source {
            Some(source) => {
                let d = source(level)?;
                if d.action_count != self.action_count {
                    return Err(Error::Unsupported(
                        "source produced dynamics with mismatched action count".into(),
                    ));
                }
                d.validate()?;
                Ok(Arc::new(d))
            }
            None => Err(Error::LevelNotInSpace { id: level.id }),
        }
    }
}

impl fmt::Debug for Upomdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Upomdp")
            .field("action_count", &self.action_count)
            .field("observation_space", &self.observation_space)
            .field("horizon", &self.horizon)
            .field("discount", &self.discount)
            .field("levels", &self.levels.len())
            .finish()
    }
}
