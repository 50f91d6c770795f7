//! Miniature gridworlds: random mazes, T-mazes with invisible goals, and
//! blindfolded mazes.
//!
//! The grid is 5x5 with a wall border and a 3x3 interior. The agent moves in
//! the four cardinal directions (a blocked move stays in place). The
//! observation is the 3x3 window centered on the agent, rendered as a
//! comparable token; T-mazes render their goal as empty everywhere, so the
//! left-goal and right-goal T-mazes play identically, and blindfold levels
//! replace every observation with a fixed zero token.
//!
//! Rewards: reaching a maze goal pays 0.9 and ends the episode; a T-maze
//! ends on the first action with +1 if it lands on the goal and -1 otherwise.
//! T-maze boundary decorations are a play-irrelevant parameter that only
//! diversifies level ids; generated levels draw a nonzero decoration while
//! evaluation fixtures use zero, keeping their ids disjoint from anything a
//! generator can emit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::upomdp::{Level, LevelDynamics, Obs, Upomdp};

pub const FAMILY: &str = "grid";

/// Interior width/height; the full grid adds a wall border on each side.
const INTERIOR: usize = 3;
const CELLS: usize = INTERIOR * INTERIOR;
pub const HORIZON: usize = 8;
pub const ACTIONS: usize = 4;

/// Fixed maze endpoints: top-left start, bottom-right goal.
const MAZE_START: usize = 0;
const MAZE_GOAL: usize = 8;

/// T-maze layout: open junction (center), left/right arms and an up
/// corridor; everything else walled.
const TMAZE_WALLS: u16 = 0b1_1100_0101;
const TMAZE_AGENT: usize = 4;
const TMAZE_LEFT: usize = 3;
const TMAZE_RIGHT: usize = 5;

const BLIND_OBS: Obs = Obs(1 << 41);
const WINDOW_TAG: u64 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridVariant {
    TMaze,
    Maze,
    Blindfold,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridParams {
    pub variant: GridVariant,
    pub walls: u16,
    pub start: u8,
    pub goal: u8,
    pub decoration: u64,
}

/// Which generator mix this family instance uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridMix {
    /// 50% T-mazes, 50% random mazes.
    TMazeMaze,
    /// 50% blindfolded mazes, 50% random mazes.
    BlindfoldMaze,
    MazeOnly,
}

#[derive(Clone, Copy, Debug)]
pub struct GridEnv {
    pub mix: GridMix,
}

impl GridEnv {
    pub fn new(mix: GridMix) -> Self {
        GridEnv { mix }
    }

    pub fn tmaze_level(&self, goal_left: bool, decoration: u64) -> Level {
        let goal = if goal_left { TMAZE_LEFT } else { TMAZE_RIGHT };
        self.level(GridParams {
            variant: GridVariant::TMaze,
            walls: TMAZE_WALLS,
            start: TMAZE_AGENT as u8,
            goal: goal as u8,
            decoration,
        })
    }

    pub fn maze_level(&self, walls: u16, decoration: u64) -> Level {
        self.level(GridParams {
            variant: GridVariant::Maze,
            walls,
            start: MAZE_START as u8,
            goal: MAZE_GOAL as u8,
            decoration,
        })
    }

    pub fn blindfold_level(&self, walls: u16, decoration: u64) -> Level {
        self.level(GridParams {
            variant: GridVariant::Blindfold,
            walls,
            start: MAZE_START as u8,
            goal: MAZE_GOAL as u8,
            decoration,
        })
    }

    fn level(&self, params: GridParams) -> Level {
        Level::new(FAMILY, serde_json::to_value(params).expect("params serialize"))
    }

    pub fn parse(level: &Level) -> Result<GridParams> {
        if level.family != FAMILY {
            return Err(Error::InvalidLevel {
                family: level.family.clone(),
                reason: "not a grid level".into(),
            });
        }
        let params: GridParams =
            serde_json::from_value(level.params.clone()).map_err(|e| Error::InvalidLevel {
                family: FAMILY.into(),
                reason: e.to_string(),
            })?;
        validate(&params)?;
        Ok(params)
    }

    /// The UPOMDP whose explicit space holds the canonical fixtures (both
    /// T-mazes, the maze evaluation suite) and whose source accepts any
    /// valid grid level, generated ones included.
    pub fn upomdp(&self) -> Upomdp {
        let mut levels: Vec<(Level, LevelDynamics)> = Vec::new();
        for level in self.explicit_levels() {
            let params = Self::parse(&level).expect("fixture params are valid");
            levels.push((level, build_dynamics(&params)));
        }
        Upomdp::new(ACTIONS, "grid-window", HORIZON, 1.0, levels)
            .expect("grid dynamics are valid")
            .with_source(|level| {
                let params = GridEnv::parse(level)?;
                Ok(build_dynamics(&params))
            })
    }

    fn explicit_levels(&self) -> Vec<Level> {
        let mut out = vec![self.tmaze_level(true, 0), self.tmaze_level(false, 0)];
        out.extend(self.eval_suite());
        out
    }

    /// Random level from the configured mix.
    pub fn generate(&self, rng: &mut ChaCha8Rng) -> Result<Level> {
        let special = rng.gen_bool(0.5);
        let decoration: u64 = rng.gen::<u64>() | 1;
        match (self.mix, special) {
            (GridMix::TMazeMaze, true) => {
                let goal_left = rng.gen_bool(0.5);
                Ok(self.tmaze_level(goal_left, decoration))
            }
            (GridMix::BlindfoldMaze, true) => {
                let walls = random_solvable_walls(rng)?;
                Ok(self.blindfold_level(walls, decoration))
            }
            _ => {
                let walls = random_solvable_walls(rng)?;
                Ok(self.maze_level(walls, decoration))
            }
        }
    }

    /// Ten fixed, solvable evaluation mazes (decoration 0, so their ids are
    /// disjoint from every generated level).
    pub fn eval_suite(&self) -> Vec<Level> {
        EVAL_WALL_PATTERNS
            .iter()
            .map(|&walls| self.maze_level(walls, 0))
            .collect()
    }

    pub fn tag(level: &Level) -> &'static str {
        match Self::parse(level).map(|p| p.variant) {
            Ok(GridVariant::TMaze) => "tmaze",
            Ok(GridVariant::Maze) => "maze",
            Ok(GridVariant::Blindfold) => "blind",
            Err(_) => "invalid",
        }
    }
}

/// Fixed evaluation wall patterns over the interior cells 1..=7 (start and
/// goal corners stay open). Each is BFS-verified solvable in the tests.
const EVAL_WALL_PATTERNS: [u16; 10] = [
    0b0_0000_0110, // walls at cells 1,2
    0b0_0000_1100, // 2,3
    0b0_0001_0010, // 1,4
    0b0_0010_0010, // 1,5
    0b0_0100_0100, // 2,6
    0b0_0101_0000, // 4,6
    0b0_0010_1000, // 3,5
    0b0_0110_0000, // 5,6
    0b0_1000_0100, // 2,7
    0b0_1001_0000, // 4,7
];

fn validate(params: &GridParams) -> Result<()> {
    let start = params.start as usize;
    let goal = params.goal as usize;
    if start >= CELLS || goal >= CELLS || start == goal {
        return Err(Error::InvalidLevel {
            family: FAMILY.into(),
            reason: "start/goal out of range".into(),
        });
    }
    if params.walls >> CELLS != 0 {
        return Err(Error::InvalidLevel {
            family: FAMILY.into(),
            reason: "wall mask covers nonexistent cells".into(),
        });
    }
    if params.walls & (1 << start) != 0 || params.walls & (1 << goal) != 0 {
        return Err(Error::InvalidLevel {
            family: FAMILY.into(),
            reason: "start or goal is walled".into(),
        });
    }
    Ok(())
}

fn random_solvable_walls(rng: &mut ChaCha8Rng) -> Result<u16> {
    const ATTEMPTS: usize = 100;
    for _ in 0..ATTEMPTS {
        // Two IID wall cells among the seven non-endpoint interior cells.
        let a = rng.gen_range(1..CELLS - 1);
        let b = rng.gen_range(1..CELLS - 1);
        if a == b {
            continue;
        }
        let walls = (1u16 << a) | (1 << b);
        if shortest_path(walls, MAZE_START, MAZE_GOAL).is_some_and(|d| d <= HORIZON) {
            return Ok(walls);
        }
    }
    Err(Error::GenerationFailed {
        attempts: ATTEMPTS,
        reason: "no solvable wall pattern found".into(),
    })
}

/// BFS distance between interior cells, `None` when the goal is unreachable.
pub fn shortest_path(walls: u16, start: usize, goal: usize) -> Option<usize> {
    let mut dist = [usize::MAX; CELLS];
    let mut queue = std::collections::VecDeque::new();
    dist[start] = 0;
    queue.push_back(start);
    while let Some(p) = queue.pop_front() {
        if p == goal {
            return Some(dist[p]);
        }
        for a in 0..ACTIONS {
            let q = step(p, a, walls);
            if q != p && dist[q] == usize::MAX {
                dist[q] = dist[p] + 1;
                queue.push_back(q);
            }
        }
    }
    None
}

/// Apply a cardinal move from interior cell `p`; blocked moves stay put.
fn step(p: usize, action: usize, walls: u16) -> usize {
    let (x, y) = ((p % INTERIOR) as isize, (p / INTERIOR) as isize);
    let (nx, ny) = match action {
        0 => (x, y - 1),
        1 => (x, y + 1),
        2 => (x - 1, y),
        _ => (x + 1, y),
    };
    if nx < 0 || ny < 0 || nx >= INTERIOR as isize || ny >= INTERIOR as isize {
        return p;
    }
    let q = (ny as usize) * INTERIOR + nx as usize;
    if walls & (1 << q) != 0 {
        p
    } else {
        q
    }
}

/// Render the 3x3 window centered on interior cell `p` as an observation
/// token. Cell values: 0 empty, 1 wall, 2 goal (when visible).
fn window_obs(p: usize, params: &GridParams) -> Obs {
    let goal_visible = params.variant == GridVariant::Maze;
    let (x, y) = ((p % INTERIOR) as isize, (p / INTERIOR) as isize);
    let mut bits: u64 = WINDOW_TAG;
    let mut shift = 0;
    for dy in -1..=1isize {
        for dx in -1..=1isize {
            let (cx, cy) = (x + dx, y + dy);
            let val: u64 = if cx < 0 || cy < 0 || cx >= INTERIOR as isize || cy >= INTERIOR as isize
            {
                // Border ring of the 5x5 grid.
                1
            } else {
                let q = (cy as usize) * INTERIOR + cx as usize;
                if params.walls & (1 << q) != 0 {
                    1
                } else if q == params.goal as usize && goal_visible {
                    2
                } else {
                    0
                }
            };
            bits |= val << shift;
            shift += 2;
        }
    }
    Obs(bits)
}

/// Build the finite dynamics of one grid level. States 0..9 are live
/// positions, states 9..18 are terminal copies carrying the final position's
/// observation.
pub fn build_dynamics(params: &GridParams) -> LevelDynamics {
    let goal = params.goal as usize;
    let obs_at = |p: usize| -> Obs {
        if params.variant == GridVariant::Blindfold {
            BLIND_OBS
        } else {
            window_obs(p, params)
        }
    };
    let mut obs = Vec::with_capacity(2 * CELLS);
    let mut terminal = Vec::with_capacity(2 * CELLS);
    for p in 0..CELLS {
        obs.push(obs_at(p));
        // Wall cells are unreachable; mark them terminal so they need no
        // transition rows.
        terminal.push(params.walls & (1 << p) != 0);
    }
    for p in 0..CELLS {
        obs.push(obs_at(p));
        terminal.push(true);
    }
    let mut transitions = vec![Vec::new(); 2 * CELLS * ACTIONS];
    let mut rewards = vec![0.0; 2 * CELLS * ACTIONS];
    for p in 0..CELLS {
        if params.walls & (1 << p) != 0 {
            continue;
        }
        for a in 0..ACTIONS {
            let q = step(p, a, params.walls);
            let idx = p * ACTIONS + a;
            match params.variant {
                GridVariant::TMaze => {
                    transitions[idx] = vec![(CELLS + q, 1.0)];
                    rewards[idx] = if q == goal && q != p { 1.0 } else { -1.0 };
                }
                GridVariant::Maze | GridVariant::Blindfold => {
                    if q == goal {
                        transitions[idx] = vec![(CELLS + q, 1.0)];
                        rewards[idx] = 0.9;
                    } else {
                        transitions[idx] = vec![(q, 1.0)];
                        rewards[idx] = 0.0;
                    }
                }
            }
        }
    }
    LevelDynamics {
        state_count: 2 * CELLS,
        action_count: ACTIONS,
        initial: vec![(params.start as usize, 1.0)],
        obs,
        transitions,
        rewards,
        terminal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::optimal_return;
    use crate::upomdp::TabularPolicy;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn tmaze_optimum_is_plus_one() {
        let env = GridEnv::new(GridMix::TMazeMaze);
        let upomdp = env.upomdp();
        for goal_left in [true, false] {
            let (v, _) = optimal_return(&env.tmaze_level(goal_left, 0), &upomdp).unwrap();
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn tmaze_goal_sides_share_all_observations() {
        let env = GridEnv::new(GridMix::TMazeMaze);
        let upomdp = env.upomdp();
        let policy = TabularPolicy::uniform(ACTIONS);
        let left = crate::enumeration::enumerate_outcomes(
            &policy,
            &env.tmaze_level(true, 0),
            &upomdp,
        )
        .unwrap();
        let right = crate::enumeration::enumerate_outcomes(
            &policy,
            &env.tmaze_level(false, 0),
            &upomdp,
        )
        .unwrap();
        let lt: Vec<_> = left.iter().map(|o| o.trajectory.clone()).collect();
        let rt: Vec<_> = right.iter().map(|o| o.trajectory.clone()).collect();
        assert_eq!(lt, rt);
    }

    #[test]
    fn eval_mazes_are_solvable_within_horizon() {
        for &walls in &EVAL_WALL_PATTERNS {
            let d = shortest_path(walls, MAZE_START, MAZE_GOAL);
            assert!(d.is_some_and(|d| d <= HORIZON), "pattern {walls:#b}");
        }
    }

    #[test]
    fn maze_optimum_is_point_nine_when_solvable() {
        let env = GridEnv::new(GridMix::MazeOnly);
        let upomdp = env.upomdp();
        for level in env.eval_suite() {
            let (v, witness) = optimal_return(&level, &upomdp).unwrap();
            assert_eq!(v, 0.9);
            let policy = witness.overlay_on(&TabularPolicy::uniform(ACTIONS));
            let u = crate::enumeration::expected_return(&policy, &level, &upomdp).unwrap();
            assert_eq!(u, 0.9);
        }
    }

    #[test]
    fn generated_levels_have_unique_ids_but_tmazes_play_identically() {
        let env = GridEnv::new(GridMix::TMazeMaze);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ids = std::collections::BTreeSet::new();
        for _ in 0..200 {
            let level = env.generate(&mut rng).unwrap();
            assert!(ids.insert(level.id), "duplicate id");
        }
    }

    #[test]
    fn blindfold_obs_is_constant() {
        let env = GridEnv::new(GridMix::BlindfoldMaze);
        let level = env.blindfold_level(EVAL_WALL_PATTERNS[0], 0);
        let params = GridEnv::parse(&level).unwrap();
        let d = build_dynamics(&params);
        assert!(d.obs.iter().all(|&o| o == BLIND_OBS));
    }

    #[test]
    fn tmaze_initial_window_differs_from_maze_windows() {
        let env = GridEnv::new(GridMix::TMazeMaze);
        let upomdp = env.upomdp();
        let t = upomdp
            .dynamics_for(&env.tmaze_level(true, 0))
            .unwrap()
            .obs[TMAZE_AGENT];
        for level in env.eval_suite() {
            let d = upomdp.dynamics_for(&level).unwrap();
            assert_ne!(d.obs[MAZE_START], t);
        }
    }
}
