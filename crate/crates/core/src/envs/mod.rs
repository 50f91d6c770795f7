//! Environment families and golden fixtures.
//!
//! Each family exposes the UPOMDP contract plus a random level generator and
//! a fixed evaluation suite. Levels serialize to one JSON object with family
//! tag, id and params, and round-trip exactly.

pub mod grid;
pub mod lever;
pub mod lottery;
pub mod random;
pub mod tabular;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::enumeration::sample_rollout;
use crate::error::{Error, Result};
use crate::rng::substream_indexed;
use crate::upomdp::{Level, TabularPolicy, Upomdp};

pub use grid::{GridEnv, GridMix, GridParams, GridVariant};
pub use lever::LeverEnv;
pub use lottery::LotteryFixture;
pub use random::random_upomdp;
pub use tabular::{ObservationPairing, TabularGameEnv};

/// Serialize a level to its JSON wire form.
pub fn level_to_json(level: &Level) -> String {
    serde_json::to_string(level).expect("levels serialize")
}

/// Parse a level from its JSON wire form.
pub fn level_from_json(json: &str) -> Result<Level> {
    serde_json::from_str(json).map_err(|e| Error::InvalidLevel {
        family: "unknown".into(),
        reason: e.to_string(),
    })
}

/// Subset tag used in evaluation summaries and CSV columns.
pub fn subset_tag(level: &Level) -> String {
    match level.family.as_str() {
        lever::FAMILY => match LeverEnv::parse(level) {
            Ok((_, true)) => "visible".into(),
            Ok((_, false)) => "invisible".into(),
            Err(_) => "invalid".into(),
        },
        grid::FAMILY => GridEnv::tag(level).into(),
        other => other.into(),
    }
}

/// Per-subset solve rates of a policy over an evaluation suite.
#[derive(Clone, Debug, Default)]
pub struct SolveRateReport {
    pub overall: f64,
    /// tag -> (solve rate, number of (level, episode) samples)
    pub per_tag: BTreeMap<String, (f64, usize)>,
}

impl SolveRateReport {
    pub fn rate(&self, tag: &str) -> f64 {
        self.per_tag.get(tag).map_or(0.0, |&(r, _)| r)
    }
}

/// Fraction of (level, episode) pairs whose episode return is positive,
/// i.e. the goal or correct lever was reached. Sampling is seeded per level
/// so the result is independent of evaluation order and thread count.
pub fn solve_rate(
    policy: &TabularPolicy,
    suite: &[Level],
    upomdp: &Upomdp,
    episodes: usize,
    seed: u64,
) -> Result<SolveRateReport> {
    assert!(!suite.is_empty(), "evaluation suite must be nonempty");
    assert!(episodes >= 1);
    let per_level: Vec<(String, usize)> = suite
        .par_iter()
        .map(|level| {
            let dynamics = upomdp.dynamics_for(level)?;
            let mut rng = substream_indexed(seed, "solve-rate", level.id);
            let mut successes = 0usize;
            for _ in 0..episodes {
                let rollout =
                    sample_rollout(policy, &dynamics, upomdp.horizon(), upomdp.discount(), &mut rng);
                if rollout.ret > 0.0 {
                    successes += 1;
                }
            }
            Ok((subset_tag(level), successes))
        })
        .collect::<Result<_>>()?;
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut total_success = 0usize;
    for (tag, successes) in per_level {
        let e = tally.entry(tag).or_insert((0, 0));
        e.0 += successes;
        e.1 += episodes;
        total_success += successes;
    }
    let total = suite.len() * episodes;
    Ok(SolveRateReport {
        overall: total_success as f64 / total as f64,
        per_tag: tally
            .into_iter()
            .map(|(tag, (s, n))| (tag, (s as f64 / n as f64, n)))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_json_round_trips_exactly() {
        let env = GridEnv::new(GridMix::TMazeMaze);
        let level = env.tmaze_level(true, 12345);
        let json = level_to_json(&level);
        let back = level_from_json(&json).unwrap();
        assert_eq!(level, back);
        assert_eq!(level_to_json(&back), json);
    }

    #[test]
    fn lever_solve_rates_by_subset() {
        let env = LeverEnv;
        let upomdp = env.upomdp();
        // Optimal witnesses on visible levels; uniform on the hidden cue.
        let mut policy = TabularPolicy::uniform(lever::LEVER_COUNT);
        for lever in 0..lever::LEVER_COUNT {
            let key = crate::upomdp::Trajectory::root(LeverEnv::initial_obs(lever, true));
            let mut dist = vec![0.0; lever::LEVER_COUNT];
            dist[lever] = 1.0;
            policy.set(key, dist).unwrap();
        }
        let report = solve_rate(&policy, &env.eval_suite(), &upomdp, 50, 7).unwrap();
        assert_eq!(report.rate("visible"), 1.0);
        // Uniform over 64 levers: about 1/64, allow 3 standard errors.
        let n = (lever::LEVER_COUNT * 50) as f64;
        let p = 1.0 / 64.0;
        let se = (p * (1.0 - p) / n).sqrt();
        assert!((report.rate("invisible") - p).abs() <= 3.0 * se);
    }

    #[test]
    fn straight_corridor_uniform_solve_rate_matches_enumeration() {
        // Maze with no interior walls: exact uniform-policy success rate is
        // the probability of hitting the far corner within the horizon,
        // computed by exhaustive enumeration.
        let env = GridEnv::new(GridMix::MazeOnly);
        let upomdp = env.upomdp();
        let level = env.maze_level(0, 0);
        let policy = TabularPolicy::uniform(grid::ACTIONS);
        let outcomes = crate::enumeration::enumerate_outcomes(&policy, &level, &upomdp).unwrap();
        let exact: f64 = outcomes
            .iter()
            .filter(|o| o.ret > 0.0)
            .map(|o| o.probability)
            .sum();
        let episodes = 4000;
        let report = solve_rate(&policy, &[level], &upomdp, episodes, 11).unwrap();
        let se = (exact * (1.0 - exact) / episodes as f64).sqrt();
        assert!(
            (report.overall - exact).abs() <= 3.0 * se,
            "sampled {} vs exact {exact}",
            report.overall
        );
    }
}
