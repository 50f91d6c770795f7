//! The six-level, two-action, one-step tabular game.
//!
//! Each level is a bandit row with a fixed reward for action A and action B.
//! With `Distinct` pairing every level has its own initial observation; with
//! `Paired` pairing levels (1,2), (3,4) and (5,6) share observations, which
//! makes the +-1.0 pair carry irreducible regret.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::upomdp::{Level, LevelDynamics, Obs, Upomdp};

pub const FAMILY: &str = "tabular";

/// Reward table: row i gives (reward of action A, reward of action B).
pub const REWARDS: [[f64; 2]; 6] = [
    [-0.1, 0.1],
    [0.7, -0.7],
    [-0.7, 0.7],
    [0.1, -0.1],
    [-1.0, 1.0],
    [1.0, -1.0],
];

const TERMINAL_OBS: Obs = Obs(100);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationPairing {
    /// Six unique initial observations; one policy can be optimal everywhere.
    Distinct,
    /// Levels (1,2), (3,4), (5,6) share observations.
    Paired,
}

#[derive(Clone, Copy, Debug)]
pub struct TabularGameEnv {
    pub pairing: ObservationPairing,
}

#[derive(Serialize, Deserialize)]
struct Params {
    row: usize,
    pairing: ObservationPairing,
}

impl TabularGameEnv {
    pub fn new(pairing: ObservationPairing) -> Self {
        TabularGameEnv { pairing }
    }

    pub fn level(&self, row: usize) -> Level {
        assert!(row < 6);
        Level::with_id(
            row as u64,
            FAMILY,
            serde_json::to_value(Params {
                row,
                pairing: self.pairing,
            })
            .expect("params serialize"),
        )
    }

    pub fn initial_obs(&self, row: usize) -> Obs {
        match self.pairing {
            ObservationPairing::Distinct => Obs(row as u64),
            ObservationPairing::Paired => Obs((row / 2) as u64),
        }
    }

    fn dynamics(&self, row: usize) -> LevelDynamics {
        LevelDynamics {
            state_count: 2,
            action_count: 2,
            initial: vec![(0, 1.0)],
            obs: vec![self.initial_obs(row), TERMINAL_OBS],
            transitions: vec![vec![(1, 1.0)], vec![(1, 1.0)], vec![], vec![]],
            rewards: vec![REWARDS[row][0], REWARDS[row][1], 0.0, 0.0],
            terminal: vec![false, true],
        }
    }

    /// The full six-level space with the tabular actor-critic discount.
    pub fn upomdp(&self) -> Upomdp {
        let levels = (0..6)
            .map(|row| (self.level(row), self.dynamics(row)))
            .collect();
        Upomdp::new(2, "tabular-initial-obs", 1, 0.95, levels)
            .expect("tabular dynamics are valid")
    }

    /// The finite space itself is the evaluation suite.
    pub fn eval_suite(&self) -> Vec<Level> {
        (0..6).map(|row| self.level(row)).collect()
    }

    pub fn parse(level: &Level) -> Result<(usize, ObservationPairing)> {
        let params: Params =
            serde_json::from_value(level.params.clone()).map_err(|e| Error::InvalidLevel {
                family: FAMILY.into(),
                reason: e.to_string(),
            })?;
        if params.row >= 6 {
            return Err(Error::InvalidLevel {
                family: FAMILY.into(),
                reason: format!("row {} out of range", params.row),
            });
        }
        Ok((params.row, params.pairing))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::expected_return;
    use crate::upomdp::TabularPolicy;

    #[test]
    fn reward_table_is_reproduced_by_dynamics() {
        let env = TabularGameEnv::new(ObservationPairing::Distinct);
        let upomdp = env.upomdp();
        for row in 0..6 {
            for action in 0..2 {
                let mut policy = TabularPolicy::uniform(2);
                let key = crate::upomdp::Trajectory::root(env.initial_obs(row));
                let mut dist = vec![0.0, 0.0];
                dist[action] = 1.0;
                policy.set(key, dist).unwrap();
                let u = expected_return(&policy, &env.level(row), &upomdp).unwrap();
                assert_eq!(u, REWARDS[row][action]);
            }
        }
    }

    #[test]
    fn paired_variant_shares_observations() {
        let env = TabularGameEnv::new(ObservationPairing::Paired);
        assert_eq!(env.initial_obs(0), env.initial_obs(1));
        assert_eq!(env.initial_obs(2), env.initial_obs(3));
        assert_eq!(env.initial_obs(4), env.initial_obs(5));
        assert_ne!(env.initial_obs(0), env.initial_obs(2));
    }

    #[test]
    fn uniform_policy_on_last_pair_has_zero_return() {
        let env = TabularGameEnv::new(ObservationPairing::Paired);
        let upomdp = env.upomdp();
        let policy = TabularPolicy::uniform(2);
        let u = expected_return(&policy, &env.level(4), &upomdp).unwrap();
        assert_eq!(u, 0.0);
    }
}
