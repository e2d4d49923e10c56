//! Frictionless double pendulum with torque actuation on both joints,
//! integrated with fixed-step RK4. Unit masses and lengths, `g = 9.81`.
//!
//! State is `(theta1, theta2, omega1, omega2)` with angles measured from the
//! downward vertical and wrapped to `(-pi, pi]` after each step.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{wrap_angle, Dynamics, Env, EnvSpec, RewardTask};
use crate::error::{Error, Result};
use crate::rng;

const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone)]
pub struct DoublePendulumEnv {
    spec: EnvSpec,
}

impl DoublePendulumEnv {
    /// `dt = 0.05`, torque bounds +-2, 200-step episodes.
    pub fn new() -> Self {
        DoublePendulumEnv {
            spec: EnvSpec {
                state_dim: 4,
                action_dim: 2,
                action_low: vec![-2.0, -2.0],
                action_high: vec![2.0, 2.0],
                dt: 0.05,
                episode_length: 200,
            },
        }
    }

    /// Balance tasks toward sampled joint configurations at rest.
    pub fn sample_balance_tasks(&self, count: usize, action_penalty: f64, seed: u64) -> Vec<RewardTask> {
        let mut rng = rng::stream(seed, 0x7065_6e64);
        (0..count)
            .map(|_| {
                let g1 = rng.random_range(-1.5..1.5);
                let g2 = rng.random_range(-1.5..1.5);
                RewardTask::pendulum_balance([g1, g2, 0.0, 0.0], action_penalty).unwrap()
            })
            .collect()
    }

    /// Angular accelerations from the equations of motion.
    fn accel(s: &[f64; 4], tau: &[f64; 2]) -> [f64; 2] {
        let (t1, t2, w1, w2) = (s[0], s[1], s[2], s[3]);
        let delta = t1 - t2;
        let (sd, cd) = (delta.sin(), delta.cos());
        // mass matrix [[2, cd], [cd, 1]]
        let rhs1 = tau[0] - sd * w2 * w2 - 2.0 * GRAVITY * t1.sin();
        let rhs2 = tau[1] + sd * w1 * w1 - GRAVITY * t2.sin();
        let det = 2.0 - cd * cd;
        [(rhs1 - cd * rhs2) / det, (2.0 * rhs2 - cd * rhs1) / det]
    }

    fn derivative(s: &[f64; 4], tau: &[f64; 2]) -> [f64; 4] {
        let a = Self::accel(s, tau);
        [s[2], s[3], a[0], a[1]]
    }

    /// Total mechanical energy; conserved under zero torque.
    pub fn energy(&self, state: &[f64]) -> f64 {
        let (t1, t2, w1, w2) = (state[0], state[1], state[2], state[3]);
        let kinetic = w1 * w1 + 0.5 * w2 * w2 + w1 * w2 * (t1 - t2).cos();
        let potential = -2.0 * GRAVITY * t1.cos() - GRAVITY * t2.cos();
        kinetic + potential
    }
}

impl Default for DoublePendulumEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Dynamics for DoublePendulumEnv {
    fn step(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if state.len() != 4 || action.len() != 2 {
            return Err(Error::invalid("pendulum_step: dimension mismatch"));
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("pendulum_step: non-finite state"));
        }
        let a = self.spec.clip_action(action);
        let tau = [a[0], a[1]];
        let s = [state[0], state[1], state[2], state[3]];
        let h = self.spec.dt;

        let k1 = Self::derivative(&s, &tau);
        let add = |s: &[f64; 4], k: &[f64; 4], f: f64| {
            [s[0] + f * k[0], s[1] + f * k[1], s[2] + f * k[2], s[3] + f * k[3]]
        };
        let k2 = Self::derivative(&add(&s, &k1, 0.5 * h), &tau);
        let k3 = Self::derivative(&add(&s, &k2, 0.5 * h), &tau);
        let k4 = Self::derivative(&add(&s, &k3, h), &tau);

        let mut next = [0.0; 4];
        for i in 0..4 {
            next[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        next[0] = wrap_angle(next[0]);
        next[1] = wrap_angle(next[1]);
        Ok(next.to_vec())
    }
}

impl Env for DoublePendulumEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn id(&self) -> String {
        String::from("double_pendulum")
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let pi = core::f64::consts::PI;
        vec![
            rng.random_range(-pi..pi),
            rng.random_range(-pi..pi),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        ]
    }

    /// Proportional torque on the wrapped angle error with light damping.
    fn expert_action(&self, task: &RewardTask, state: &[f64]) -> Vec<f64> {
        let goal = match task {
            RewardTask::PendulumBalance { goal, .. } => goal,
            _ => return vec![0.0, 0.0],
        };
        let raw = [
            wrap_angle(goal[0] - state[0]) - 0.1 * state[2],
            wrap_angle(goal[1] - state[1]) - 0.1 * state[3],
        ];
        self.spec.clip_action(&raw)
    }
}
