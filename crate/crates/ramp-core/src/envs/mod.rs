//! Deterministic analytic environments with shared dynamics and swappable
//! reward tasks, plus behavior-policy dataset collection.
//!
//! Dynamics and rewards are strictly separated: stepping never looks at a
//! [`RewardTask`], and rewards are pure functions of `(state, action)`.

mod collect;
mod pendulum;
mod point;
mod reacher;

pub use collect::{collect_offline_dataset, uniform_action};
pub use pendulum::DoublePendulumEnv;
pub use point::PointEnv;
pub use reacher::ReacherEnv;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use num_traits::Float;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Static description of an environment's spaces and episode shape.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub dt: f64,
    pub episode_length: usize,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.action_dim == 0 || self.episode_length == 0 {
            return Err(Error::invalid("dimensions and episode length must be positive"));
        }
        if self.action_low.len() != self.action_dim || self.action_high.len() != self.action_dim {
            return Err(Error::invalid("action bound lengths must match action_dim"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        if self.action_low.iter().zip(&self.action_high).any(|(l, h)| !(l < h)) {
            return Err(Error::invalid("action_low must be below action_high elementwise"));
        }
        Ok(())
    }

    /// Componentwise clip of an action into the bounds.
    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&l, &h))| a.clamp(l, h))
            .collect()
    }
}

/// Anything that can advance a state under an action. Implemented both by
/// the analytic environments and by learned dynamics models, so evaluation
/// code can run either interchangeably.
pub trait Dynamics {
    fn step(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>>;
}

/// An analytic environment: pure dynamics, a reset distribution driven by an
/// explicit RNG, and an analytic expert used as the behavior policy.
pub trait Env: Dynamics {
    fn spec(&self) -> &EnvSpec;

    /// Stable identifier (`point2`, `reacher`, `double_pendulum`, ...).
    fn id(&self) -> String;

    /// Samples an initial state.
    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Proportional controller toward the task goal, clipped to bounds.
    fn expert_action(&self, task: &RewardTask, state: &[f64]) -> Vec<f64>;
}

/// A localized Gaussian reward perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub magnitude: f64,
}

/// A reward function over `(state, action)`. Evaluation is pure; all
/// parameter validation happens at construction.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardTask {
    /// `-||s - goal|| - c ||a||^2`
    PointGoal { goal: Vec<f64>, action_penalty: f64 },
    /// Point reward plus Gaussian bumps (negative: unsafe regions,
    /// small positive: local maxima).
    PointPerturbed { goal: Vec<f64>, action_penalty: f64, bumps: Vec<Bump> },
    /// `-||tip(theta) - goal|| - c ||a||^2` for the two-link arm.
    ReacherGoal { goal: [f64; 2], action_penalty: f64 },
    /// `-||wrap(theta - goal_theta), omega - goal_omega|| - c ||a||^2`.
    PendulumBalance { goal: [f64; 4], action_penalty: f64 },
}

impl RewardTask {
    pub fn point_goal(goal: Vec<f64>, action_penalty: f64) -> Result<Self> {
        if !(action_penalty >= 0.0) {
            return Err(Error::invalid("action penalty must be non-negative"));
        }
        Ok(RewardTask::PointGoal { goal, action_penalty })
    }

    pub fn point_perturbed(goal: Vec<f64>, action_penalty: f64, bumps: Vec<Bump>) -> Result<Self> {
        if !(action_penalty >= 0.0) {
            return Err(Error::invalid("action penalty must be non-negative"));
        }
        for (i, b) in bumps.iter().enumerate() {
            if !(b.radius > 0.0) {
                return Err(Error::invalid(format!("bump {i} has non-positive radius")));
            }
            if b.center.len() != goal.len() {
                return Err(Error::invalid(format!("bump {i} center dimension mismatch")));
            }
        }
        Ok(RewardTask::PointPerturbed { goal, action_penalty, bumps })
    }

    pub fn reacher_goal(goal: [f64; 2], action_penalty: f64) -> Result<Self> {
        let r = (goal[0] * goal[0] + goal[1] * goal[1]).sqrt();
        if r > 2.0 {
            return Err(Error::invalid("reacher goal outside reachable annulus"));
        }
        Ok(RewardTask::ReacherGoal { goal, action_penalty })
    }

    pub fn pendulum_balance(goal: [f64; 4], action_penalty: f64) -> Result<Self> {
        if !(action_penalty >= 0.0) {
            return Err(Error::invalid("action penalty must be non-negative"));
        }
        Ok(RewardTask::PendulumBalance { goal, action_penalty })
    }

    /// Pure reward evaluation.
    pub fn reward(&self, state: &[f64], action: &[f64]) -> f64 {
        let sq_norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        match self {
            RewardTask::PointGoal { goal, action_penalty } => {
                let d2: f64 = state.iter().zip(goal).map(|(s, g)| (s - g) * (s - g)).sum();
                -d2.sqrt() - action_penalty * sq_norm(action)
            }
            RewardTask::PointPerturbed { goal, action_penalty, bumps } => {
                let d2: f64 = state.iter().zip(goal).map(|(s, g)| (s - g) * (s - g)).sum();
                let mut r = -d2.sqrt() - action_penalty * sq_norm(action);
                for b in bumps {
                    let dist2: f64 =
                        state.iter().zip(&b.center).map(|(s, c)| (s - c) * (s - c)).sum();
                    r += b.magnitude * (-dist2 / (b.radius * b.radius)).exp();
                }
                r
            }
            RewardTask::ReacherGoal { goal, action_penalty } => {
                let tip = reacher::tip(state[0], state[1]);
                let dx = tip[0] - goal[0];
                let dy = tip[1] - goal[1];
                -(dx * dx + dy * dy).sqrt() - action_penalty * sq_norm(action)
            }
            RewardTask::PendulumBalance { goal, action_penalty } => {
                let da1 = wrap_angle(state[0] - goal[0]);
                let da2 = wrap_angle(state[1] - goal[1]);
                let dw1 = state[2] - goal[2];
                let dw2 = state[3] - goal[3];
                let d2 = da1 * da1 + da2 * da2 + 0.1 * (dw1 * dw1 + dw2 * dw2);
                -d2.sqrt() - action_penalty * sq_norm(action)
            }
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let tau = 2.0 * core::f64::consts::PI;
    let mut r = x % tau;
    if r < 0.0 {
        r += tau;
    }
    if r > core::f64::consts::PI {
        r - tau
    } else {
        r
    }
}

/// One fixed-length episode. `states` has one more entry than `actions`;
/// re-simulating the stored actions from `states[0]` reproduces every stored
/// state bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn validate(&self, spec: &EnvSpec) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(Error::invalid("states must be one longer than actions"));
        }
        if self.states.iter().any(|s| s.len() != spec.state_dim)
            || self.actions.iter().any(|a| a.len() != spec.action_dim)
        {
            return Err(Error::invalid("trajectory dimension mismatch"));
        }
        if let Some(r) = &self.rewards {
            if r.len() != self.actions.len() {
                return Err(Error::invalid("reward length mismatch"));
            }
        }
        Ok(())
    }
}

/// How a dataset was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub policy: String,
    pub seed: u64,
    pub epsilon: f64,
}

/// A reward-free collection of trajectories under one environment.
#[derive(Debug, Clone)]
pub struct OfflineDataset {
    pub env_id: String,
    pub spec: EnvSpec,
    pub trajectories: Vec<Trajectory>,
    pub provenance: Provenance,
}

impl OfflineDataset {
    pub fn num_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn num_steps(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.trajectories.is_empty() {
            return Err(Error::invalid("dataset needs at least one trajectory"));
        }
        for t in &self.trajectories {
            t.validate(&self.spec)?;
            if t.len() != self.spec.episode_length {
                return Err(Error::invalid("trajectory length differs from episode_length"));
            }
        }
        Ok(())
    }

    /// Axis-aligned bounding box of all visited states (low, high).
    pub fn state_bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.spec.state_dim;
        let mut low = alloc::vec![f64::INFINITY; d];
        let mut high = alloc::vec![f64::NEG_INFINITY; d];
        for t in &self.trajectories {
            for s in &t.states {
                for i in 0..d {
                    low[i] = low[i].min(s[i]);
                    high[i] = high[i].max(s[i]);
                }
            }
        }
        (low, high)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn wrap_angle_range() {
        let pi = core::f64::consts::PI;
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(pi) - pi).abs() < 1e-15);
        assert!((wrap_angle(-pi) - pi).abs() < 1e-15);
        assert!((wrap_angle(3.0 * pi) - pi).abs() < 1e-12);
        assert!((wrap_angle(2.5 * pi) - 0.5 * pi).abs() < 1e-12);
        assert!((wrap_angle(-2.5 * pi) + 0.5 * pi).abs() < 1e-12);
    }

    #[test]
    fn point_reward_examples() {
        let t = RewardTask::point_goal(vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(t.reward(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        // 3-4-5 triangle
        assert_eq!(t.reward(&[3.0, 4.0], &[0.0, 0.0]), -5.0);
        let t = RewardTask::point_goal(vec![0.0, 0.0], 0.1).unwrap();
        assert!((t.reward(&[1.0, 0.0], &[2.0, 0.0]) - (-1.4)).abs() < 1e-15);
    }

    #[test]
    fn perturbed_reward_examples() {
        let base = RewardTask::point_goal(vec![1.0, 1.0], 0.05).unwrap();
        let empty = RewardTask::point_perturbed(vec![1.0, 1.0], 0.05, vec![]).unwrap();
        let s = [0.3, -0.2];
        let a = [0.5, 0.1];
        assert_eq!(base.reward(&s, &a), empty.reward(&s, &a));

        let bump = Bump { center: vec![0.3, -0.2], radius: 0.7, magnitude: -2.0 };
        let t = RewardTask::point_perturbed(vec![1.0, 1.0], 0.05, vec![bump]).unwrap();
        // at the center, exp(0) = 1
        assert!((t.reward(&s, &a) - (base.reward(&s, &a) - 2.0)).abs() < 1e-15);

        // at distance = radius, the bump contributes magnitude / e
        let s2 = [0.3 + 0.7, -0.2];
        let expected = base.reward(&s2, &a) + (-2.0) * (-1.0f64).exp();
        assert!((t.reward(&s2, &a) - expected).abs() < 1e-15);
    }

    #[test]
    fn perturbed_rejects_bad_radius() {
        let bump = Bump { center: vec![0.0, 0.0], radius: 0.0, magnitude: 1.0 };
        assert!(RewardTask::point_perturbed(vec![0.0, 0.0], 0.1, vec![bump]).is_err());
    }

    #[test]
    fn reward_purity() {
        let t = RewardTask::point_goal(vec![0.5, -0.5], 0.1).unwrap();
        let s = [0.2, 0.9];
        let a = [-0.3, 0.4];
        let r1 = t.reward(&s, &a);
        for _ in 0..5 {
            assert_eq!(t.reward(&s, &a), r1);
        }
    }
}
