//! The 64-lever guessing game.
//!
//! One of 64 levers is correct. On visible levels the observation reveals the
//! correct lever and the reward is +-1; on invisible levels the observation
//! is a shared hidden cue and the reward is +-10. The observation token maps
//! the 65-component one-hot encoding: token 0 is the hidden cue, token 1+j
//! names lever j.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::upomdp::{Level, LevelDynamics, Obs, Upomdp};

pub const FAMILY: &str = "lever";
pub const LEVER_COUNT: usize = 64;

pub const HIDDEN_CUE: Obs = Obs(0);
const TERMINAL_OBS: Obs = Obs(1000);

#[derive(Clone, Copy, Debug, Default)]
pub struct LeverEnv;

#[derive(Serialize, Deserialize)]
struct Params {
    lever: usize,
    visible: bool,
}

impl LeverEnv {
    pub fn level(&self, lever: usize, visible: bool) -> Level {
        assert!(lever < LEVER_COUNT);
        let id = lever as u64 + if visible { 0 } else { LEVER_COUNT as u64 };
        Level::with_id(
            id,
            FAMILY,
            serde_json::to_value(Params { lever, visible }).expect("params serialize"),
        )
    }

    pub fn parse(level: &Level) -> Result<(usize, bool)> {
        let params: Params =
            serde_json::from_value(level.params.clone()).map_err(|e| Error::InvalidLevel {
                family: FAMILY.into(),
                reason: e.to_string(),
            })?;
        if params.lever >= LEVER_COUNT {
            return Err(Error::InvalidLevel {
                family: FAMILY.into(),
                reason: format!("lever {} out of range", params.lever),
            });
        }
        Ok((params.lever, params.visible))
    }

    pub fn initial_obs(lever: usize, visible: bool) -> Obs {
        if visible {
            Obs(1 + lever as u64)
        } else {
            HIDDEN_CUE
        }
    }

    fn dynamics(&self, lever: usize, visible: bool) -> LevelDynamics {
        let scale = if visible { 1.0 } else { 10.0 };
        let mut rewards = Vec::with_capacity(2 * LEVER_COUNT);
        for a in 0..LEVER_COUNT {
            rewards.push(if a == lever { scale } else { -scale });
        }
        rewards.extend(std::iter::repeat(0.0).take(LEVER_COUNT));
        LevelDynamics {
            state_count: 2,
            action_count: LEVER_COUNT,
            initial: vec![(0, 1.0)],
            obs: vec![Self::initial_obs(lever, visible), TERMINAL_OBS],
            transitions: (0..2 * LEVER_COUNT)
                .map(|i| if i < LEVER_COUNT { vec![(1, 1.0)] } else { vec![] })
                .collect(),
            rewards,
            terminal: vec![false, true],
        }
    }

    /// All 128 levels: 64 visible, 64 invisible.
    pub fn upomdp(&self) -> Upomdp {
        let mut levels = Vec::with_capacity(2 * LEVER_COUNT);
        for visible in [true, false] {
            for lever in 0..LEVER_COUNT {
                levels.push((self.level(lever, visible), self.dynamics(lever, visible)));
            }
        }
        Upomdp::new(LEVER_COUNT, "lever-one-hot", 1, 1.0, levels)
            .expect("lever dynamics are valid")
    }

    /// Correct lever uniform, visible flag 50/50.
    pub fn generate(&self, rng: &mut ChaCha8Rng) -> Level {
        let lever = rng.gen_range(0..LEVER_COUNT);
        let visible = rng.gen_bool(0.5);
        self.level(lever, visible)
    }

    /// All 64 visible plus all 64 invisible levels.
    pub fn eval_suite(&self) -> Vec<Level> {
        let mut out = Vec::with_capacity(2 * LEVER_COUNT);
        for visible in [true, false] {
            for lever in 0..LEVER_COUNT {
                out.push(self.level(lever, visible));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::{enumerate_outcomes, expected_return};
    use crate::oracle::{optimal_return, regret};
    use crate::upomdp::{TabularPolicy, Trajectory};
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn visible_deterministic_pull_is_single_outcome() {
        let env = LeverEnv;
        let upomdp = env.upomdp();
        let level = env.level(3, true);
        let mut policy = TabularPolicy::uniform(LEVER_COUNT);
        let mut dist = vec![0.0; LEVER_COUNT];
        dist[3] = 1.0;
        policy
            .set(Trajectory::root(LeverEnv::initial_obs(3, true)), dist)
            .unwrap();
        let outs = enumerate_outcomes(&policy, &level, &upomdp).unwrap();
        assert_eq!(outs.len(), 1);
        assert_eq!(outs[0].probability, 1.0);
        assert_eq!(outs[0].ret, 1.0);
    }

    #[test]
    fn invisible_optimum_is_ten() {
        let env = LeverEnv;
        let upomdp = env.upomdp();
        let (v, _) = optimal_return(&env.level(17, false), &upomdp).unwrap();
        assert_eq!(v, 10.0);
    }

    #[test]
    fn uniform_policy_regret_on_invisible_level() {
        let env = LeverEnv;
        let upomdp = env.upomdp();
        let policy = TabularPolicy::uniform(LEVER_COUNT);
        let r = regret(&policy, &env.level(0, false), &upomdp).unwrap();
        assert_eq!(r, 19.6875);
        let u = expected_return(&policy, &env.level(0, false), &upomdp).unwrap();
        assert_eq!(u, -9.6875);
    }

    #[test]
    fn uniform_policy_regret_on_visible_level() {
        let env = LeverEnv;
        let upomdp = env.upomdp();
        let policy = TabularPolicy::uniform(LEVER_COUNT);
        let r = regret(&policy, &env.level(9, true), &upomdp).unwrap();
        assert_eq!(r, 1.96875);
    }

    #[test]
    fn generator_visible_fraction_is_half() {
        let env = LeverEnv;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let mut visible = 0usize;
        for _ in 0..n {
            let level = env.generate(&mut rng);
            let (_, vis) = LeverEnv::parse(&level).unwrap();
            if vis {
                visible += 1;
            }
        }
        let frac = visible as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "visible fraction {frac}");
    }
}
