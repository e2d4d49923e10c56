//! Two-link planar arm with velocity-command joints: `theta' = theta + dt*a`.
//! Links have unit length; the reward measures tip distance to a goal in the
//! reachable annulus.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Dynamics, Env, EnvSpec, RewardTask};
use crate::error::{Error, Result};
use crate::rng;

/// Forward kinematics of the unit two-link arm.
pub fn tip(theta1: f64, theta2: f64) -> [f64; 2] {
    [
        theta1.cos() + (theta1 + theta2).cos(),
        theta1.sin() + (theta1 + theta2).sin(),
    ]
}

#[derive(Debug, Clone)]
pub struct ReacherEnv {
    spec: EnvSpec,
}

impl ReacherEnv {
    pub fn new() -> Self {
        ReacherEnv {
            spec: EnvSpec {
                state_dim: 2,
                action_dim: 2,
                action_low: vec![-1.0, -1.0],
                action_high: vec![1.0, 1.0],
                dt: 0.2,
                episode_length: 64,
            },
        }
    }

    /// Tip-space goals with radius in `[0.5, 1.8]`.
    pub fn sample_goal_tasks(&self, count: usize, action_penalty: f64, seed: u64) -> Vec<RewardTask> {
        let mut rng = rng::stream(seed, 0x7265_6163_68);
        (0..count)
            .map(|_| {
                let r = rng.random_range(0.5..1.8);
                let ang = rng.random_range(-core::f64::consts::PI..core::f64::consts::PI);
                RewardTask::reacher_goal([r * ang.cos(), r * ang.sin()], action_penalty).unwrap()
            })
            .collect()
    }
}

impl Default for ReacherEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Dynamics for ReacherEnv {
    fn step(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if state.len() != 2 || action.len() != 2 {
            return Err(Error::invalid("reacher_step: dimension mismatch"));
        }
        let a = self.spec.clip_action(action);
        Ok(vec![state[0] + self.spec.dt * a[0], state[1] + self.spec.dt * a[1]])
    }
}

impl Env for ReacherEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn id(&self) -> String {
        String::from("reacher")
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let pi = core::f64::consts::PI;
        vec![rng.random_range(-pi..pi), rng.random_range(-pi..pi)]
    }

    /// Jacobian-transpose proportional controller on the tip error.
    fn expert_action(&self, task: &RewardTask, state: &[f64]) -> Vec<f64> {
        let goal = match task {
            RewardTask::ReacherGoal { goal, .. } => goal,
            _ => return vec![0.0, 0.0],
        };
        let (t1, t2) = (state[0], state[1]);
        let p = tip(t1, t2);
        let e = [goal[0] - p[0], goal[1] - p[1]];
        let s1 = t1.sin();
        let c1 = t1.cos();
        let s12 = (t1 + t2).sin();
        let c12 = (t1 + t2).cos();
        // J = [[-s1 - s12, -s12], [c1 + c12, c12]]
        let raw = [
            (-s1 - s12) * e[0] + (c1 + c12) * e[1],
            (-s12) * e[0] + c12 * e[1],
        ];
        self.spec.clip_action(&raw)
    }
}
