//! Seeded random finite UPOMDPs for property checks.
//!
//! Instances stay deliberately small (at most 4 levels, 2 steps, 3 actions)
//! and draw observations from tiny per-depth token pools shared across
//! levels, so information sets genuinely overlap while exact game solving
//! stays cheap. Rewards are multiples of 0.25 and transition probabilities
//! come from {1, 1/2}, keeping all enumeration arithmetic exact.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::substream;
use crate::upomdp::{Level, LevelDynamics, Obs, Upomdp};

pub const FAMILY: &str = "random";

/// Generate a random UPOMDP from a seed. Horizon-2 instances use 2 actions
/// to keep strategy enumeration small; horizon-1 instances may use 3.
pub fn random_upomdp(seed: u64) -> Upomdp {
    let mut rng = substream(seed, "random-upomdp");
    let horizon = if rng.gen_bool(0.5) { 1 } else { 2 };
    let actions = if horizon == 1 {
        rng.gen_range(2..=3)
    } else {
        2
    };
    let n_levels = rng.gen_range(2..=4);
    let discount = [1.0, 0.9, 0.5][rng.gen_range(0..3)];

    let levels = (0..n_levels)
        .map(|i| {
            let level = Level::with_id(
                i as u64,
                FAMILY,
                serde_json::json!({ "seed": seed, "index": i }),
            );
            (level, random_dynamics(&mut rng, horizon, actions))
        })
        .collect();
    Upomdp::new(actions, "random-tokens", horizon, discount, levels)
        .expect("generated dynamics are valid")
}

fn random_dynamics(rng: &mut ChaCha8Rng, horizon: usize, actions: usize) -> LevelDynamics {
    // Layered states: sizes per depth, terminal sink at the last layer.
    let mut layer_sizes = Vec::with_capacity(horizon + 1);
    for _ in 0..horizon {
        layer_sizes.push(rng.gen_range(1..=2usize));
    }
    layer_sizes.push(1); // terminal layer
    let mut layer_start = vec![0usize];
    for &s in &layer_sizes {
        layer_start.push(layer_start.last().unwrap() + s);
    }
    let state_count = *layer_start.last().unwrap();

    let mut obs = Vec::with_capacity(state_count);
    let mut terminal = vec![false; state_count];
    for depth in 0..layer_sizes.len() {
        for _ in 0..layer_sizes[depth] {
            // Two shared tokens per depth.
            obs.push(Obs((depth as u64) * 10 + rng.gen_range(0..2)));
        }
    }
    for s in layer_start[horizon]..state_count {
        terminal[s] = true;
    }

    let initial = if layer_sizes[0] == 1 {
        vec![(0, 1.0)]
    } else if rng.gen_bool(0.5) {
        vec![(0, 0.5), (1, 0.5)]
    } else {
        vec![(rng.gen_range(0..2), 1.0)]
    };

    let mut transitions = vec![Vec::new(); state_count * actions];
    let mut rewards = vec![0.0; state_count * actions];
    for depth in 0..horizon {
        for s in layer_start[depth]..layer_start[depth + 1] {
            for a in 0..actions {
                let idx = s * actions + a;
                rewards[idx] = (rng.gen_range(-8..=8) as f64) * 0.25;
                let next_size = layer_sizes[depth + 1];
                let base = layer_start[depth + 1];
                transitions[idx] = if next_size >= 2 && rng.gen_bool(0.4) {
                    vec![(base, 0.5), (base + 1, 0.5)]
                } else {
                    vec![(base + rng.gen_range(0..next_size), 1.0)]
                };
            }
        }
    }
    LevelDynamics {
        state_count,
        action_count: actions,
        initial,
        obs,
        transitions,
        rewards,
        terminal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = random_upomdp(42);
        let b = random_upomdp(42);
        assert_eq!(a.levels().len(), b.levels().len());
        assert_eq!(a.action_count(), b.action_count());
        assert_eq!(a.horizon(), b.horizon());
        let pa = crate::upomdp::TabularPolicy::uniform(a.action_count());
        for level in a.levels() {
            let ua = crate::enumeration::expected_return(&pa, level, &a).unwrap();
            let ub = crate::enumeration::expected_return(&pa, level, &b).unwrap();
            assert_eq!(ua, ub);
        }
    }

    #[test]
    fn instances_are_valid_across_seeds() {
        for seed in 0..40 {
            let u = random_upomdp(seed);
            assert!(!u.levels().is_empty());
            for level in u.levels() {
                u.dynamics_for(level).unwrap().validate().unwrap();
            }
        }
    }
}
