//! Goal-reaching environment with linear dynamics `s' = s + dt * a`,
//! generalized over the state dimension. Actions are clipped to bounds
//! before integration and states are clamped to a +-10 workspace box.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Dynamics, Env, EnvSpec, RewardTask};
use crate::error::{Error, Result};
use crate::rng;

pub const WORKSPACE_HALF_WIDTH: f64 = 10.0;
const RESET_HALF_WIDTH: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct PointEnv {
    spec: EnvSpec,
}

impl PointEnv {
    /// `dim`-dimensional point mass; `dt = 1`, action bounds +-1,
    /// 64-step episodes.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be positive"));
        }
        let spec = EnvSpec {
            state_dim: dim,
            action_dim: dim,
            action_low: vec![-1.0; dim],
            action_high: vec![1.0; dim],
            dt: 1.0,
            episode_length: 64,
        };
        Ok(PointEnv { spec })
    }

    pub fn dim(&self) -> usize {
        self.spec.state_dim
    }

    /// Goal-reaching tasks with goals drawn uniformly from +-4 per axis.
    pub fn sample_goal_tasks(&self, count: usize, action_penalty: f64, seed: u64) -> Vec<RewardTask> {
        let mut rng = rng::stream(seed, 0x676f_616c);
        (0..count)
            .map(|_| {
                let goal: Vec<f64> =
                    (0..self.dim()).map(|_| rng.random_range(-4.0..4.0)).collect();
                RewardTask::point_goal(goal, action_penalty).unwrap()
            })
            .collect()
    }
}

impl Dynamics for PointEnv {
    fn step(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.spec.state_dim || action.len() != self.spec.action_dim {
            return Err(Error::invalid("point_step: dimension mismatch"));
        }
        let a = self.spec.clip_action(action);
        Ok(state
            .iter()
            .zip(&a)
            .map(|(s, ai)| {
                (s + self.spec.dt * ai).clamp(-WORKSPACE_HALF_WIDTH, WORKSPACE_HALF_WIDTH)
            })
            .collect())
    }
}

impl Env for PointEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn id(&self) -> String {
        format!("point{}", self.spec.state_dim)
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.spec.state_dim)
            .map(|_| rng.random_range(-RESET_HALF_WIDTH..RESET_HALF_WIDTH))
            .collect()
    }

    fn expert_action(&self, task: &RewardTask, state: &[f64]) -> Vec<f64> {
        let goal: &[f64] = match task {
            RewardTask::PointGoal { goal, .. } | RewardTask::PointPerturbed { goal, .. } => goal,
            _ => &[],
        };
        if goal.len() != state.len() {
            return vec![0.0; self.spec.action_dim];
        }
        let raw: Vec<f64> = goal.iter().zip(state).map(|(g, s)| g - s).collect();
        self.spec.clip_action(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_step_of_linear_dynamics() {
        let env = PointEnv::new(2).unwrap();
        assert_eq!(env.step(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn zero_action_keeps_state() {
        let env = PointEnv::new(2).unwrap();
        assert_eq!(env.step(&[2.5, -3.5], &[0.0, 0.0]).unwrap(), vec![2.5, -3.5]);
    }

    #[test]
    fn workspace_clamp() {
        let env = PointEnv::new(2).unwrap();
        assert_eq!(env.step(&[9.9, 0.0], &[1.0, 0.0]).unwrap(), vec![10.0, 0.0]);
    }

    #[test]
    fn action_clipped_before_integration() {
        let env = PointEnv::new(1).unwrap();
        assert_eq!(env.step(&[0.0], &[5.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let env = PointEnv::new(2).unwrap();
        assert!(env.step(&[0.0], &[0.0, 0.0]).is_err());
        assert!(env.step(&[0.0, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn expert_moves_toward_goal() {
        let env = PointEnv::new(2).unwrap();
        let task = RewardTask::point_goal(vec![0.0, 0.0], 0.1).unwrap();
        let a = env.expert_action(&task, &[5.0, 0.0]);
        assert_eq!(a, vec![-1.0, 0.0]); // clipped proportional step
    }
}
