//! Reward-free dataset collection with an epsilon-greedy behavior policy.

use alloc::format;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Env, EnvSpec, OfflineDataset, Provenance, RewardTask, Trajectory};
use crate::error::{Error, Result};
use crate::rng;

/// One uniform-random action within the bounds.
pub fn uniform_action(spec: &EnvSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    spec.action_low
        .iter()
        .zip(&spec.action_high)
        .map(|(&l, &h)| rng.random_range(l..=h))
        .collect()
}

/// Collects `m` reward-free trajectories. Each trajectory is assigned a task
/// from `tasks` round-robin; at every step the policy takes a uniform random
/// action with probability `epsilon` and the analytic expert action toward
/// the assigned goal otherwise. Each trajectory runs on its own RNG stream
/// derived from `(seed, index)`, so the result is independent of collection
/// order.
pub fn collect_offline_dataset<E: Env + ?Sized>(
    env: &E,
    tasks: &[RewardTask],
    epsilon: f64,
    m: usize,
    seed: u64,
) -> Result<OfflineDataset> {
    if tasks.is_empty() {
        return Err(Error::invalid("collect: task list must not be empty"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("collect: epsilon {epsilon} outside [0, 1]")));
    }
    if m == 0 {
        return Err(Error::invalid("collect: need at least one trajectory"));
    }
    let spec = env.spec().clone();
    spec.validate()?;

    let mut trajectories = Vec::with_capacity(m);
    for i in 0..m {
        let mut traj_rng = rng::stream(seed, i as u64);
        let task = &tasks[i % tasks.len()];
        let mut state = env.reset(&mut traj_rng);
        let mut states = Vec::with_capacity(spec.episode_length + 1);
        let mut actions = Vec::with_capacity(spec.episode_length);
        states.push(state.clone());
        for _ in 0..spec.episode_length {
            let explore: f64 = traj_rng.random();
            let action = if explore < epsilon {
                uniform_action(&spec, &mut traj_rng)
            } else {
                env.expert_action(task, &state)
            };
            state = env.step(&state, &action)?;
            actions.push(action);
            states.push(state.clone());
        }
        trajectories.push(Trajectory { states, actions, rewards: None });
    }

    Ok(OfflineDataset {
        env_id: env.id(),
        spec,
        trajectories,
        provenance: Provenance {
            policy: format!("eps_greedy(gain=1.0, eps={epsilon})"),
            seed,
            epsilon,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Dynamics, PointEnv};
    use alloc::vec;

    fn point_tasks() -> Vec<RewardTask> {
        vec![RewardTask::point_goal(vec![0.0, 0.0], 0.1).unwrap()]
    }

    #[test]
    fn rejects_bad_arguments() {
        let env = PointEnv::new(2).unwrap();
        assert!(collect_offline_dataset(&env, &[], 0.5, 2, 0).is_err());
        assert!(collect_offline_dataset(&env, &point_tasks(), 1.5, 2, 0).is_err());
        assert!(collect_offline_dataset(&env, &point_tasks(), 0.5, 0, 0).is_err());
    }

    #[test]
    fn same_seed_gives_identical_dataset() {
        let env = PointEnv::new(2).unwrap();
        let a = collect_offline_dataset(&env, &point_tasks(), 0.5, 3, 7).unwrap();
        let b = collect_offline_dataset(&env, &point_tasks(), 0.5, 3, 7).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        let c = collect_offline_dataset(&env, &point_tasks(), 0.5, 3, 8).unwrap();
        assert_ne!(a.trajectories, c.trajectories);
    }

    #[test]
    fn rewards_are_not_stored() {
        let env = PointEnv::new(2).unwrap();
        let d = collect_offline_dataset(&env, &point_tasks(), 0.5, 2, 1).unwrap();
        assert!(d.trajectories.iter().all(|t| t.rewards.is_none()));
        d.validate().unwrap();
    }

    #[test]
    fn trajectories_replay_bitwise() {
        let env = PointEnv::new(3).unwrap();
        let tasks = env.sample_goal_tasks(4, 0.1, 33);
        let d = collect_offline_dataset(&env, &tasks, 0.5, 4, 99).unwrap();
        for t in &d.trajectories {
            let mut s = t.states[0].clone();
            for (i, a) in t.actions.iter().enumerate() {
                s = env.step(&s, a).unwrap();
                assert_eq!(s, t.states[i + 1], "replay diverged at step {i}");
            }
        }
    }

    #[test]
    fn pure_exploration_is_uniform() {
        // chi-square over 10 bins per dimension, 10k actions, eps = 1
        let env = PointEnv::new(2).unwrap();
        let d = collect_offline_dataset(&env, &point_tasks(), 1.0, 100, 5).unwrap();
        let mut counts = [[0usize; 10]; 2];
        let mut n = 0usize;
        for t in &d.trajectories {
            for a in &t.actions {
                for dim in 0..2 {
                    let bin = (((a[dim] + 1.0) / 2.0 * 10.0) as usize).min(9);
                    counts[dim][bin] += 1;
                }
                n += 1;
            }
        }
        assert!(n >= 6400, "need roughly 10k samples, got {n}");
        let expected = n as f64 / 10.0;
        for dim in 0..2 {
            let chi2: f64 = counts[dim]
                .iter()
                .map(|&c| {
                    let d = c as f64 - expected;
                    d * d / expected
                })
                .sum();
            // df = 9, alpha = 0.001 critical value 27.88
            assert!(chi2 < 27.88, "dim {dim}: chi2 {chi2}");
        }
    }

    #[test]
    fn greedy_expert_approaches_goal_monotonically() {
        let env = PointEnv::new(2).unwrap();
        let task = RewardTask::point_goal(vec![0.0, 0.0], 0.0).unwrap();
        let mut s = vec![5.0, 0.0];
        let mut dist = 5.0;
        for _ in 0..10 {
            let a = env.expert_action(&task, &s);
            s = env.step(&s, &a).unwrap();
            let d = (s[0] * s[0] + s[1] * s[1]).sqrt();
            assert!(d < dist || d == 0.0, "distance did not shrink: {dist} -> {d}");
            dist = d;
        }
        assert!(dist < 1e-12);
    }
}
