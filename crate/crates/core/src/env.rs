//! Simulated 4-D goal-reaching task: a point robot carries a cup (gripper
//! held closed) from a start position to the expert's preferred goal.
//!
//! The policy input stacks the three most recent (position, gripper)
//! frames; actions are the next absolute position plus a gripper value.

use serde::{Deserialize, Serialize};

use rand::prelude::*;
use rand_distr::Normal;

use crate::seeded::named_rng;

pub const POSITION_DIM: usize = 3;
pub const ACTION_DIM: usize = 4;
pub const HISTORY_FRAMES: usize = 3;
pub const INPUT_DIM: usize = HISTORY_FRAMES * (POSITION_DIM + 1);

/// Hard cap on episode length.
pub const DEFAULT_HORIZON: usize = 100;
/// Goal tolerance in Euclidean distance.
pub const DEFAULT_EPS_GOAL: f64 = 0.02;
/// Expert per-step movement cap (infinity norm).
pub const DEFAULT_OMEGA: f64 = 0.01;

pub type Position = [f64; POSITION_DIM];
pub type Action = [f64; ACTION_DIM];
pub type PolicyInput = [f64; INPUT_DIM];

pub fn l2_distance(a: &Position, b: &Position) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn max_coordinate_distance(a: &Position, b: &Position) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Workspace layout. The goals sit a unit apart in x so a goal shift is
/// unambiguous, and every goal is reachable from every start within the
/// horizon at the expert's step size. All values are config-overridable and
/// echoed into result files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    pub start: Position,
    pub g0: Position,
    pub g1: Position,
    pub g1a: Position,
    pub g1b: Position,
    pub env_shift_start: Position,
}

impl Default for Geometry {
    fn default() -> Self {
        let g0 = [0.5, 0.5, 0.1];
        let g1 = [-0.5, 0.5, 0.1];
        let lerp = |t: f64| {
            [
                g0[0] + t * (g1[0] - g0[0]),
                g0[1] + t * (g1[1] - g0[1]),
                g0[2] + t * (g1[2] - g0[2]),
            ]
        };
        Self {
            start: [0.0, 0.0, 0.5],
            g0,
            g1,
            g1a: lerp(1.0 / 3.0),
            g1b: lerp(2.0 / 3.0),
            env_shift_start: [0.3, -0.3, 0.5],
        }
    }
}

/// Expert goal schedules over deployment episodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Fixed goal throughout.
    Stationary,
    /// Goal jumps from g0 to g1 at episode 5.
    Shift,
    /// Goal walks g0 -> g1a -> g1b -> g1 at episodes 5, 8 and 11.
    Drift,
    /// Fixed goal, but the robot starts from a new position in every
    /// episode.
    EnvShift,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Stationary,
        Scenario::Shift,
        Scenario::Drift,
        Scenario::EnvShift,
    ];

    /// The expert's active goal for a deployment episode.
    pub fn goal(&self, geometry: &Geometry, episode: usize) -> Position {
        match self {
            Scenario::Stationary | Scenario::EnvShift => geometry.g0,
            Scenario::Shift => {
                if episode < 5 {
                    geometry.g0
                } else {
                    geometry.g1
                }
            }
            Scenario::Drift => match episode {
                0..=4 => geometry.g0,
                5..=7 => geometry.g1a,
                8..=10 => geometry.g1b,
                _ => geometry.g1,
            },
        }
    }

    /// Start position used for deployment episodes.
    pub fn start(&self, geometry: &Geometry) -> Position {
        match self {
            Scenario::EnvShift => geometry.env_shift_start,
            _ => geometry.start,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Stationary => "stationary",
            Scenario::Shift => "shift",
            Scenario::Drift => "drift",
            Scenario::EnvShift => "env-shift",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stationary" => Ok(Scenario::Stationary),
            "shift" => Ok(Scenario::Shift),
            "drift" => Ok(Scenario::Drift),
            "env-shift" => Ok(Scenario::EnvShift),
            other => Err(format!(
                "unknown scenario {other:?} (expected stationary, shift, drift or env-shift)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub start: Position,
    pub goal: Position,
    pub eps_goal: f64,
    pub horizon: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        let geometry = Geometry::default();
        Self {
            start: geometry.start,
            goal: geometry.g0,
            eps_goal: DEFAULT_EPS_GOAL,
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// One episode's mutable state.
#[derive(Debug, Clone)]
pub struct ReachEnv {
    cfg: EnvConfig,
    /// Most recent frame first.
    frames: [(Position, f64); HISTORY_FRAMES],
    t: usize,
    done: bool,
    success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub done: bool,
    pub success: bool,
    pub t: usize,
}

impl ReachEnv {
    /// Fresh episode; the start pose fills the whole history and the
    /// gripper starts closed.
    pub fn new(cfg: EnvConfig) -> Self {
        Self {
            cfg,
            frames: [(cfg.start, 1.0); HISTORY_FRAMES],
            t: 0,
            done: false,
            success: false,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn position(&self) -> Position {
        self.frames[0].0
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn success(&self) -> bool {
        self.success
    }

    /// Flattened policy input, most recent frame first.
    pub fn observation(&self) -> PolicyInput {
        let mut x = [0.0; INPUT_DIM];
        for (i, (pos, grip)) in self.frames.iter().enumerate() {
            let base = i * (POSITION_DIM + 1);
            x[base..base + POSITION_DIM].copy_from_slice(pos);
            x[base + POSITION_DIM] = *grip;
        }
        x
    }

    /// Execute an action: the position jumps to the action's xyz and the
    /// gripper state snaps to the nearer binary value. The episode ends on
    /// reaching the goal or exhausting the horizon.
    pub fn step(&mut self, action: &Action) -> EnvStep {
        debug_assert!(!self.done, "episode already finished");
        let pos = [action[0], action[1], action[2]];
        let grip = if action[3] >= 0.5 { 1.0 } else { 0.0 };
        self.frames.rotate_right(1);
        self.frames[0] = (pos, grip);
        self.t += 1;
        self.success = l2_distance(&pos, &self.cfg.goal) <= self.cfg.eps_goal;
        self.done = self.success || self.t >= self.cfg.horizon;
        EnvStep {
            done: self.done,
            success: self.success,
            t: self.t,
        }
    }
}

/// Greedy goal-seeking expert with an infinity-norm step cap.
#[derive(Debug, Clone, Copy)]
pub struct ExpertPolicy {
    pub goal: Position,
    pub omega: f64,
}

impl ExpertPolicy {
    pub fn new(goal: Position) -> Self {
        Self {
            goal,
            omega: DEFAULT_OMEGA,
        }
    }

    /// Next position: step toward the goal scaled so the largest coordinate
    /// moves by omega. Exactly at the goal the step is zero.
    pub fn action(&self, position: &Position) -> Action {
        let max_d = max_coordinate_distance(&self.goal, position);
        let mut action = [0.0; ACTION_DIM];
        if max_d == 0.0 {
            action[..POSITION_DIM].copy_from_slice(position);
        } else {
            for i in 0..POSITION_DIM {
                action[i] = position[i] + self.omega * (self.goal[i] - position[i]) / max_d;
            }
        }
        action[POSITION_DIM] = 1.0;
        action
    }
}

/// How executed demo actions are perturbed. Labels always stay clean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DemoNoise {
    /// Scale the whole step by one draw of `N(mean, std)` per timestep.
    MultiplicativeScale { mean: f64, std: f64 },
    /// Shift each step coordinate by `omega * N(mean, std)`.
    AdditiveStep { mean: f64, std: f64 },
}

impl Default for DemoNoise {
    fn default() -> Self {
        DemoNoise::MultiplicativeScale {
            mean: 1.0,
            std: 0.5,
        }
    }
}

/// Roll out `n` noisy expert episodes; each pair holds the clean expert
/// action as the label while the noisy action is what the robot executes.
pub fn collect_demos(
    n: usize,
    expert: &ExpertPolicy,
    env_cfg: &EnvConfig,
    noise: &DemoNoise,
    seed: u64,
) -> Vec<(PolicyInput, Action)> {
    let mut rng = named_rng(seed, "demo-noise");
    let mut pairs = Vec::new();
    for _ in 0..n {
        let mut env = ReachEnv::new(*env_cfg);
        loop {
            let x = env.observation();
            let position = env.position();
            let clean = expert.action(&position);
            pairs.push((x, clean));
            let executed = perturb_action(&clean, &position, noise, &mut rng);
            if env.step(&executed).done {
                break;
            }
        }
    }
    pairs
}

fn perturb_action(
    clean: &Action,
    position: &Position,
    noise: &DemoNoise,
    rng: &mut impl Rng,
) -> Action {
    let mut out = *clean;
    match *noise {
        DemoNoise::MultiplicativeScale { mean, std } => {
            let scale = if std == 0.0 {
                mean
            } else {
                Normal::new(mean, std).expect("valid normal").sample(rng)
            };
            for i in 0..POSITION_DIM {
                out[i] = position[i] + scale * (clean[i] - position[i]);
            }
        }
        DemoNoise::AdditiveStep { mean, std } => {
            for item in out.iter_mut().take(POSITION_DIM) {
                let shift = if std == 0.0 {
                    mean
                } else {
                    Normal::new(mean, std).expect("valid normal").sample(rng)
                };
                *item += DEFAULT_OMEGA * shift;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expert_action_examples() {
        let expert = ExpertPolicy::new([1.0, 0.5, 0.25]);
        let a = expert.action(&[0.0, 0.0, 0.0]);
        assert_relative_eq!(a[0], 0.01, max_relative = 1e-12);
        assert_relative_eq!(a[1], 0.005, max_relative = 1e-12);
        assert_relative_eq!(a[2], 0.0025, max_relative = 1e-12);
        assert_eq!(a[3], 1.0);

        // Exactly at the goal: no movement.
        let at_goal = expert.action(&[1.0, 0.5, 0.25]);
        assert_eq!(&at_goal[..3], &[1.0, 0.5, 0.25]);

        // One step from the goal lands exactly on it.
        let expert = ExpertPolicy::new([1.0, 0.0, 0.0]);
        let a = expert.action(&[0.99, 0.0, 0.0]);
        assert_relative_eq!(a[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn step_terminates_on_goal_or_horizon() {
        let cfg = EnvConfig::default();
        let mut env = ReachEnv::new(cfg);
        let goal = cfg.goal;
        let out = env.step(&[goal[0], goal[1], goal[2], 1.0]);
        assert!(out.done && out.success);

        let mut env = ReachEnv::new(cfg);
        for t in 1..=cfg.horizon {
            let out = env.step(&[0.0, 0.0, 0.5, 1.0]);
            assert_eq!(out.done, t == cfg.horizon);
        }
        assert!(env.done() && !env.success());
    }

    #[test]
    fn expert_rollout_reaches_goal_within_horizon() {
        let cfg = EnvConfig::default();
        let expert = ExpertPolicy::new(cfg.goal);
        let mut env = ReachEnv::new(cfg);
        let mut prev_maxd = max_coordinate_distance(&env.position(), &cfg.goal);
        let mut steps = 0;
        loop {
            let pos = env.position();
            let action = expert.action(&pos);
            // Step cap in the infinity norm.
            let inf_step = max_coordinate_distance(
                &[action[0], action[1], action[2]],
                &pos,
            );
            assert!(inf_step <= DEFAULT_OMEGA + 1e-12);
            let out = env.step(&action);
            let maxd = max_coordinate_distance(&env.position(), &cfg.goal);
            assert!(maxd <= prev_maxd + 1e-12, "max-d distance increased");
            prev_maxd = maxd;
            steps += 1;
            if out.done {
                assert!(out.success, "expert failed to reach the goal");
                break;
            }
        }
        // Start is 0.5 away in the infinity norm; roughly 50 steps.
        assert!((45..=60).contains(&steps), "took {steps} steps");
    }

    #[test]
    fn expert_reaches_all_scenario_goals_from_all_starts() {
        let geometry = Geometry::default();
        for scenario in Scenario::ALL {
            for episode in [0, 5, 8, 11, 14] {
                let cfg = EnvConfig {
                    start: scenario.start(&geometry),
                    goal: scenario.goal(&geometry, episode),
                    ..EnvConfig::default()
                };
                let expert = ExpertPolicy::new(cfg.goal);
                let mut env = ReachEnv::new(cfg);
                while !env.done() {
                    let a = expert.action(&env.position());
                    env.step(&a);
                }
                assert!(env.success(), "{scenario:?} episode {episode} unreached");
            }
        }
    }

    #[test]
    fn scenario_goal_schedules() {
        let g = Geometry::default();
        assert_eq!(Scenario::Stationary.goal(&g, 11), g.g0);
        assert_eq!(Scenario::Shift.goal(&g, 4), g.g0);
        assert_eq!(Scenario::Shift.goal(&g, 5), g.g1);
        assert_eq!(Scenario::Drift.goal(&g, 9), g.g1b);
        assert_eq!(Scenario::Drift.goal(&g, 5), g.g1a);
        assert_eq!(Scenario::Drift.goal(&g, 12), g.g1);
        assert_eq!(Scenario::EnvShift.start(&g), g.env_shift_start);
        assert_eq!(Scenario::Shift.start(&g), g.start);
    }

    #[test]
    fn observation_replicates_start_then_rolls() {
        let cfg = EnvConfig::default();
        let mut env = ReachEnv::new(cfg);
        let x = env.observation();
        for f in 0..HISTORY_FRAMES {
            let base = f * 4;
            assert_eq!(&x[base..base + 3], &cfg.start);
            assert_eq!(x[base + 3], 1.0);
        }
        env.step(&[0.1, 0.2, 0.3, 1.0]);
        let x = env.observation();
        assert_eq!(&x[0..3], &[0.1, 0.2, 0.3]);
        assert_eq!(&x[4..7], &cfg.start);
    }

    #[test]
    fn noiseless_demos_execute_the_labels() {
        let cfg = EnvConfig::default();
        let expert = ExpertPolicy::new(cfg.goal);
        let clean_noise = DemoNoise::MultiplicativeScale {
            mean: 1.0,
            std: 0.0,
        };
        let pairs = collect_demos(1, &expert, &cfg, &clean_noise, 0);
        // With no noise the executed trajectory equals the labeled one, so
        // each recorded input's current position must match the previous
        // pair's labeled action.
        for w in pairs.windows(2) {
            let (_, prev_action) = &w[0];
            let (x, _) = &w[1];
            assert_eq!(&x[0..3], &prev_action[0..3]);
        }
    }

    #[test]
    fn default_demo_collection_shape() {
        let cfg = EnvConfig::default();
        let expert = ExpertPolicy::new(cfg.goal);
        let pairs = collect_demos(10, &expert, &cfg, &DemoNoise::default(), 3);
        // Ten episodes of roughly steps-to-goal pairs each.
        assert!(
            (400..=1000).contains(&pairs.len()),
            "unexpected pair count {}",
            pairs.len()
        );
        assert!(pairs.iter().all(|(_, a)| a[3] == 1.0));
    }

    #[test]
    fn demo_collection_is_deterministic() {
        let cfg = EnvConfig::default();
        let expert = ExpertPolicy::new(cfg.goal);
        let a = collect_demos(3, &expert, &cfg, &DemoNoise::default(), 9);
        let b = collect_demos(3, &expert, &cfg, &DemoNoise::default(), 9);
        assert_eq!(a.len(), b.len());
        for ((xa, aa), (xb, ab)) in a.iter().zip(&b) {
            assert_eq!(xa, xb);
            assert_eq!(aa, ab);
        }
    }
}
