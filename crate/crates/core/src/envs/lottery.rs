//! A two-level betting fixture with stochastic state assignment.
//!
//! Two levels share a one-shot structure: the world lands in state A or
//! state B (with probability 0.99 for the level's own letter and 0.01 for
//! the other), the agent observes which state it is in, and bets 100 on
//! which level it is playing. Winning pays +100, losing -100. The fixture's
//! utility matrix over the four deterministic policies `a1a1 .. a2a2` is the
//! standard counterexample for local regret reasoning.

use crate::error::{Error, Result};
use crate::games::DecisionMatrix;
use crate::upomdp::{DeterministicPolicy, Level, LevelDynamics, Obs, TabularPolicy, Trajectory, Upomdp};

pub const FAMILY: &str = "lottery";

pub const OBS_A: Obs = Obs(1);
pub const OBS_B: Obs = Obs(2);
const TERMINAL_OBS: Obs = Obs(3);

#[derive(Clone, Copy, Debug, Default)]
pub struct LotteryFixture;

impl LotteryFixture {
    pub fn level_a(&self) -> Level {
        Level::with_id(0, FAMILY, serde_json::json!({ "truth": "A" }))
    }

    pub fn level_b(&self) -> Level {
        Level::with_id(1, FAMILY, serde_json::json!({ "truth": "B" }))
    }

    fn dynamics(&self, truth_a: bool) -> LevelDynamics {
        let (pa, pb) = if truth_a { (0.99, 0.01) } else { (0.01, 0.99) };
        // Betting on the true level pays +100 in either state.
        let win = 100.0;
        let (r_a1, r_a2) = if truth_a { (win, -win) } else { (-win, win) };
        LevelDynamics {
            state_count: 3,
            action_count: 2,
            initial: vec![(0, pa), (1, pb)],
            obs: vec![OBS_A, OBS_B, TERMINAL_OBS],
            transitions: vec![
                vec![(2, 1.0)],
                vec![(2, 1.0)],
                vec![(2, 1.0)],
                vec![(2, 1.0)],
                vec![],
                vec![],
            ],
            rewards: vec![r_a1, r_a2, r_a1, r_a2, 0.0, 0.0],
            terminal: vec![false, false, true],
        }
    }

    pub fn upomdp(&self) -> Upomdp {
        Upomdp::new(
            2,
            "lottery-state-letter",
            1,
            1.0,
            vec![
                (self.level_a(), self.dynamics(true)),
                (self.level_b(), self.dynamics(false)),
            ],
        )
        .expect("lottery dynamics are valid")
    }

    /// The four deterministic policies `a_i a_j`: action i at state A, j at B.
    pub fn deterministic_policies(&self) -> Vec<(String, DeterministicPolicy)> {
        let mut out = Vec::new();
        for i in 0..2usize {
            for j in 0..2usize {
                let mut d = DeterministicPolicy::new();
                d.table.insert(Trajectory::root(OBS_A), i);
                d.table.insert(Trajectory::root(OBS_B), j);
                out.push((format!("a{}a{}", i + 1, j + 1), d));
            }
        }
        out
    }

    /// Utility matrix: rows are the two levels, columns the four policies.
    pub fn utility_matrix(&self) -> Result<DecisionMatrix> {
        let upomdp = self.upomdp();
        let policies = self.deterministic_policies();
        let uniform = TabularPolicy::uniform(2);
        let mut data = Vec::with_capacity(8);
        for level in upomdp.levels() {
            for (_, d) in &policies {
                let policy = d.overlay_on(&uniform);
                data.push(crate::enumeration::expected_return(&policy, level, &upomdp)?);
            }
        }
        Ok(DecisionMatrix::new(2, 4, data).with_labels(
            vec!["levelA".into(), "levelB".into()],
            policies.into_iter().map(|(n, _)| n).collect(),
        ))
    }

    pub fn parse(level: &Level) -> Result<bool> {
        match level.params.get("truth").and_then(|v| v.as_str()) {
            Some("A") => Ok(true),
            Some("B") => Ok(false),
            _ => Err(Error::InvalidLevel {
                family: FAMILY.into(),
                reason: "missing truth letter".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::regret_matrix;

    #[test]
    fn utility_matrix_matches_reference_values() {
        let m = LotteryFixture.utility_matrix().unwrap();
        assert_eq!(m.row(0), &[100.0, 98.0, -98.0, -100.0]);
        assert_eq!(m.row(1), &[-100.0, 98.0, -98.0, 100.0]);
    }

    #[test]
    fn regret_matrix_matches_reference_values() {
        let m = LotteryFixture.utility_matrix().unwrap();
        let r = regret_matrix(&m);
        assert_eq!(r.row(0), &[0.0, 2.0, 198.0, 200.0]);
        assert_eq!(r.row(1), &[200.0, 2.0, 198.0, 0.0]);
    }

    #[test]
    fn two_outcomes_under_constant_bet() {
        let fixture = LotteryFixture;
        let upomdp = fixture.upomdp();
        let (_, a1a1) = &fixture.deterministic_policies()[0];
        let policy = a1a1.overlay_on(&TabularPolicy::uniform(2));
        let outs =
            crate::enumeration::enumerate_outcomes(&policy, &fixture.level_a(), &upomdp).unwrap();
        assert_eq!(outs.len(), 2);
        let probs: Vec<f64> = outs.iter().map(|o| o.probability).collect();
        assert!(probs.contains(&0.99) && probs.contains(&0.01));
    }
}
