//! The Q-basis ensemble: networks mapping `(state, H-action-sequence)` to
//! K cumulant estimates, trained by minibatch Adam on mean-squared error
//! against discounted feature sums, and optionally finetuned online against
//! Monte-Carlo reward windows.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;

use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::features::CumulantDataset;
use crate::linalg::Matrix;
use crate::rewardfit::{constant_feature_cumulant, RewardWeights};
use crate::rng;
use crate::tinynet::{adam_step, Activation, AdamState, MlpParams};

/// Training hyperparameters for [`train_qbasis`].
#[derive(Debug, Clone)]
pub struct QBasisTrainConfig {
    /// Hidden layer widths of each member.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub ensemble_size: usize,
    pub seed: u64,
}

impl Default for QBasisTrainConfig {
    fn default() -> Self {
        QBasisTrainConfig {
            hidden: vec![512, 512],
            epochs: 4,
            batch_size: 128,
            learning_rate: 3e-4,
            ensemble_size: 8,
            seed: 0,
        }
    }
}

/// One logged minibatch loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRow {
    pub member: usize,
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
}

/// An ensemble of independently trained Q-basis networks sharing one
/// architecture: `concat(s, a_{1:H}) -> R^K`.
#[derive(Debug, Clone)]
pub struct QBasisEnsemble {
    members: Vec<MlpParams>,
    state_dim: usize,
    action_dim: usize,
    h: usize,
    k: usize,
    gamma: f64,
    pub epochs_trained: usize,
    pub initial_losses: Vec<f64>,
    pub final_losses: Vec<f64>,
}

impl QBasisEnsemble {
    /// Reassembles an ensemble from stored parts (checkpoint load, tests).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        members: Vec<MlpParams>,
        state_dim: usize,
        action_dim: usize,
        h: usize,
        k: usize,
        gamma: f64,
        epochs_trained: usize,
        initial_losses: Vec<f64>,
        final_losses: Vec<f64>,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("ensemble needs at least one member"));
        }
        let in_dim = state_dim + h * action_dim;
        for m in &members {
            if m.input_dim() != in_dim || m.output_dim() != k {
                return Err(Error::invalid("member shape mismatch"));
            }
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid("gamma must lie in [0, 1)"));
        }
        Ok(QBasisEnsemble {
            members,
            state_dim,
            action_dim,
            h,
            k,
            gamma,
            epochs_trained,
            initial_losses,
            final_losses,
        })
    }

    pub fn members(&self) -> &[MlpParams] {
        &self.members
    }

    pub fn ensemble_size(&self) -> usize {
        self.members.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn input_dim(&self) -> usize {
        self.state_dim + self.h * self.action_dim
    }

    fn check_query(&self, state: &[f64], actions: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::invalid("predict_psi: state dimension mismatch"));
        }
        if actions.len() != self.h * self.action_dim {
            return Err(Error::invalid(format!(
                "predict_psi: expected {} actions of dim {}, got {} values",
                self.h,
                self.action_dim,
                actions.len()
            )));
        }
        Ok(())
    }

    /// Each member's K-vector for one `(state, action-sequence)` query;
    /// row `e` is member `e`. `actions` is the flattened H-step sequence.
    pub fn predict_psi(&self, state: &[f64], actions: &[f64]) -> Result<Matrix> {
        self.check_query(state, actions)?;
        let mut input = Vec::with_capacity(self.input_dim());
        input.extend_from_slice(state);
        input.extend_from_slice(actions);
        let mut out = Matrix::zeros(self.ensemble_size(), self.k);
        for (e, m) in self.members.iter().enumerate() {
            let y = m.forward(&input)?;
            out.row_mut(e).copy_from_slice(&y);
        }
        Ok(out)
    }
}

fn dataset_loss(member: &MlpParams, data: &CumulantDataset) -> Result<f64> {
    let pred = member.forward_batch(data.inputs())?;
    let mut loss = 0.0;
    for r in 0..data.len() {
        let p = pred.row(r);
        let y = data.targets().row(r);
        for c in 0..data.k() {
            let d = p[c] - y[c];
            loss += d * d;
        }
    }
    Ok(loss / data.len() as f64)
}

/// Trains an ensemble on a cumulant dataset. Members differ only in their
/// init seed and shuffling stream, so training one member is unaffected by
/// the others. Returns the ensemble and a per-minibatch loss log.
pub fn train_qbasis(
    data: &CumulantDataset,
    cfg: &QBasisTrainConfig,
) -> Result<(QBasisEnsemble, Vec<TrainLogRow>)> {
    if data.is_empty() {
        return Err(Error::invalid("train_qbasis: empty dataset"));
    }
    if cfg.ensemble_size == 0 {
        return Err(Error::invalid("train_qbasis: need at least one member"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("train_qbasis: batch_size must be positive"));
    }
    let in_dim = data.input_dim();
    let mut sizes = Vec::with_capacity(cfg.hidden.len() + 2);
    sizes.push(in_dim);
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(data.k());

    let mut members = Vec::with_capacity(cfg.ensemble_size);
    let mut initial_losses = Vec::new();
    let mut final_losses = Vec::new();
    let mut log = Vec::new();

    for e in 0..cfg.ensemble_size {
        let member_seed = rng::derive_seed(cfg.seed, e as u64);
        let mut member = MlpParams::init(&sizes, Activation::Relu, member_seed)?;
        let mut adam = AdamState::new(&member, cfg.learning_rate);
        let mut shuffle_rng = rng::stream(member_seed, 0x7368_7566);
        initial_losses.push(dataset_loss(&member, data)?);

        let mut order: Vec<usize> = (0..data.len()).collect();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut shuffle_rng);
            for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let b = chunk.len();
                let mut xin = Vec::with_capacity(b * in_dim);
                let mut yb = Vec::with_capacity(b * data.k());
                for &r in chunk {
                    xin.extend_from_slice(data.inputs().row(r));
                    yb.extend_from_slice(data.targets().row(r));
                }
                let xin = Matrix::from_vec(b, in_dim, xin)?;
                let (pred, cache) = member.forward_batch_cached(&xin)?;

                let mut loss = 0.0;
                let mut grad = Matrix::zeros(b, data.k());
                for r in 0..b {
                    let p = pred.row(r);
                    let y = &yb[r * data.k()..(r + 1) * data.k()];
                    let g = grad.row_mut(r);
                    for c in 0..data.k() {
                        let d = p[c] - y[c];
                        loss += d * d;
                        g[c] = 2.0 * d / b as f64;
                    }
                }
                loss /= b as f64;
                if !loss.is_finite() {
                    return Err(Error::numeric(format!(
                        "member {e} epoch {epoch} batch {batch_idx}: loss diverged"
                    )));
                }
                let (grads, _) = member.backward_batch(&cache, &grad);
                adam_step(&mut member, &grads, &mut adam)?;
                log.push(TrainLogRow { member: e, epoch, batch: batch_idx, loss });
            }
        }
        final_losses.push(dataset_loss(&member, data)?);
        members.push(member);
    }

    let ensemble = QBasisEnsemble::from_parts(
        members,
        data.state_dim(),
        data.action_dim(),
        data.h(),
        data.k(),
        data.gamma(),
        cfg.epochs,
        initial_losses,
        final_losses,
    )?;
    Ok((ensemble, log))
}

/// A window of an online trajectory with its discounted reward sum
/// `G = sum_{j=0..H-1} gamma^j r_{t+j}`.
#[derive(Debug, Clone)]
pub struct RewardWindow {
    pub state: Vec<f64>,
    /// Flattened `H * action_dim` actions.
    pub actions: Vec<f64>,
    pub discounted_reward: f64,
}

/// Extracts reward windows from trajectories that carry rewards.
pub fn reward_windows(
    trajectories: &[Trajectory],
    gamma: f64,
    h: usize,
    stride: usize,
) -> Result<Vec<RewardWindow>> {
    if stride < 1 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    let mut out = Vec::new();
    for traj in trajectories {
        let rewards = traj
            .rewards
            .as_ref()
            .ok_or_else(|| Error::invalid("reward_windows: trajectory lacks rewards"))?;
        if traj.len() < h {
            continue;
        }
        let mut t = 0;
        while t + h <= traj.len() {
            let mut actions = Vec::with_capacity(h * traj.actions[0].len());
            for a in &traj.actions[t..t + h] {
                actions.extend_from_slice(a);
            }
            let mut g = 0.0;
            let mut scale = 1.0;
            for j in 0..h {
                g += scale * rewards[t + j];
                scale *= gamma;
            }
            out.push(RewardWindow { state: traj.states[t].clone(), actions, discounted_reward: g });
            t += stride;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FinetuneConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig { learning_rate: 3e-4, steps: 200, batch_size: 32, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FinetuneReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub steps: usize,
}

/// Finetunes every member toward the Monte-Carlo Q of the current task:
/// gradient steps on `(sum_k w_k psi_k(s, a) + w_bias c - G)^2` with the
/// regression weights frozen.
pub fn finetune_qbasis(
    ensemble: &mut QBasisEnsemble,
    weights: &RewardWeights,
    windows: &[RewardWindow],
    cfg: &FinetuneConfig,
) -> Result<FinetuneReport> {
    if windows.is_empty() {
        return Err(Error::invalid("finetune: no reward windows"));
    }
    if weights.w.len() != ensemble.k() + 1 {
        return Err(Error::invalid("finetune: weight length mismatch"));
    }
    let in_dim = ensemble.input_dim();
    for w in windows {
        if w.state.len() != ensemble.state_dim()
            || w.actions.len() != ensemble.h() * ensemble.action_dim()
        {
            return Err(Error::invalid("finetune: window shape mismatch"));
        }
    }
    let k = ensemble.k();
    let bias_term = weights.w[k] * constant_feature_cumulant(ensemble.gamma(), ensemble.h());

    let member_loss = |member: &MlpParams| -> Result<f64> {
        let mut loss = 0.0;
        for w in windows {
            let mut input = Vec::with_capacity(in_dim);
            input.extend_from_slice(&w.state);
            input.extend_from_slice(&w.actions);
            let psi = member.forward(&input)?;
            let pred = crate::linalg::dot(&psi, &weights.w[..k]) + bias_term;
            let d = pred - w.discounted_reward;
            loss += d * d;
        }
        Ok(loss / windows.len() as f64)
    };

    let initial_loss = {
        let mut acc = 0.0;
        for m in &ensemble.members {
            acc += member_loss(m)?;
        }
        acc / ensemble.ensemble_size() as f64
    };

    for (e, member) in ensemble.members.iter_mut().enumerate() {
        let mut adam = AdamState::new(member, cfg.learning_rate);
        let mut rng = rng::stream(rng::derive_seed(cfg.seed, e as u64), 0x6669_6e65);
        let mut order: Vec<usize> = (0..windows.len()).collect();
        let mut cursor = windows.len(); // forces an initial shuffle
        for _ in 0..cfg.steps {
            let b = cfg.batch_size.min(windows.len());
            let mut xin = Vec::with_capacity(b * in_dim);
            let mut targets = Vec::with_capacity(b);
            for _ in 0..b {
                if cursor >= windows.len() {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                let w = &windows[order[cursor]];
                cursor += 1;
                xin.extend_from_slice(&w.state);
                xin.extend_from_slice(&w.actions);
                targets.push(w.discounted_reward);
            }
            let xin = Matrix::from_vec(b, in_dim, xin)?;
            let (pred, cache) = member.forward_batch_cached(&xin)?;
            let mut grad = Matrix::zeros(b, k);
            for r in 0..b {
                let combo = crate::linalg::dot(pred.row(r), &weights.w[..k]) + bias_term;
                let res = 2.0 * (combo - targets[r]) / b as f64;
                let g = grad.row_mut(r);
                for c in 0..k {
                    g[c] = res * weights.w[c];
                }
            }
            let (grads, _) = member.backward_batch(&cache, &grad);
            adam_step(member, &grads, &mut adam)?;
        }
    }

    let final_loss = {
        let mut acc = 0.0;
        for m in &ensemble.members {
            acc += member_loss(m)?;
        }
        acc / ensemble.ensemble_size() as f64
    };
    Ok(FinetuneReport { initial_loss, final_loss, steps: cfg.steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{collect_offline_dataset, Env, PointEnv};
    use crate::features::{build_cumulant_dataset, CumulantDataset, FeatureKind, FeatureMap};

    fn small_cumulant_data(seed: u64) -> CumulantDataset {
        let env = PointEnv::new(2).unwrap();
        let tasks = env.sample_goal_tasks(3, 0.1, seed);
        let d = collect_offline_dataset(&env, &tasks, 0.5, 6, seed).unwrap();
        let map = FeatureMap::new(FeatureKind::GaussianLinear, 4, 2, 2, seed).unwrap();
        build_cumulant_dataset(&d, &map, 0.9, 4, 4).unwrap()
    }

    fn tiny_cfg(seed: u64) -> QBasisTrainConfig {
        QBasisTrainConfig {
            hidden: vec![32, 32],
            epochs: 3,
            batch_size: 16,
            learning_rate: 1e-3,
            ensemble_size: 2,
            seed,
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let data = small_cumulant_data(0);
        let (train, _) = data.split_holdout(1); // everything held out
        assert!(train.is_empty());
        assert!(train_qbasis(&train, &tiny_cfg(0)).is_err());
    }

    #[test]
    fn training_reduces_loss_and_logs_every_batch() {
        let data = small_cumulant_data(1);
        let cfg = tiny_cfg(1);
        let (ens, log) = train_qbasis(&data, &cfg).unwrap();
        for e in 0..cfg.ensemble_size {
            assert!(
                ens.final_losses[e] < ens.initial_losses[e],
                "member {e}: {} !< {}",
                ens.final_losses[e],
                ens.initial_losses[e]
            );
        }
        let batches_per_epoch = data.len().div_ceil(cfg.batch_size);
        assert_eq!(log.len(), cfg.ensemble_size * cfg.epochs * batches_per_epoch);
    }

    #[test]
    fn constant_targets_are_fit() {
        // all targets equal to a constant vector c
        let base = small_cumulant_data(2);
        let c = [0.8, -0.3, 0.1, 0.5];
        let mut targets = Vec::new();
        for _ in 0..base.len() {
            targets.extend_from_slice(&c);
        }
        let data = CumulantDataset::from_parts(
            base.inputs().clone(),
            Matrix::from_vec(base.len(), 4, targets).unwrap(),
            base.h(),
            base.gamma(),
            base.state_dim(),
            base.action_dim(),
        )
        .unwrap();
        let cfg = QBasisTrainConfig {
            hidden: vec![32],
            epochs: 5000,
            batch_size: 96,
            learning_rate: 5e-3,
            ensemble_size: 1,
            seed: 3,
        };
        let (ens, _) = train_qbasis(&data, &cfg).unwrap();
        let pred = ens.members()[0].forward_batch(data.inputs()).unwrap();
        for r in 0..data.len() {
            for k in 0..4 {
                assert!(
                    (pred.get(r, k) - c[k]).abs() < 1e-2,
                    "row {r} k {k}: {}",
                    pred.get(r, k)
                );
            }
        }
    }

    #[test]
    fn single_entry_is_memorized() {
        let base = small_cumulant_data(4);
        let one = CumulantDataset::from_parts(
            Matrix::from_vec(1, base.input_dim(), base.inputs().row(0).to_vec()).unwrap(),
            Matrix::from_vec(1, base.k(), base.targets().row(0).to_vec()).unwrap(),
            base.h(),
            base.gamma(),
            base.state_dim(),
            base.action_dim(),
        )
        .unwrap();
        let cfg = QBasisTrainConfig {
            hidden: vec![16],
            epochs: 2000,
            batch_size: 1,
            learning_rate: 3e-3,
            ensemble_size: 1,
            seed: 5,
        };
        let (ens, _) = train_qbasis(&one, &cfg).unwrap();
        assert!(ens.final_losses[0] < 1e-6, "loss {}", ens.final_losses[0]);
    }

    #[test]
    fn members_are_trained_independently() {
        let data = small_cumulant_data(6);
        let cfg2 = tiny_cfg(9);
        let cfg1 = QBasisTrainConfig { ensemble_size: 1, ..cfg2.clone() };
        let (e2, _) = train_qbasis(&data, &cfg2).unwrap();
        let (e1, _) = train_qbasis(&data, &cfg1).unwrap();
        assert_eq!(e1.members()[0], e2.members()[0]);
    }

    #[test]
    fn epoch_losses_decrease_early() {
        let data = small_cumulant_data(7);
        let cfg = QBasisTrainConfig {
            hidden: vec![32, 32],
            epochs: 3,
            batch_size: 8,
            learning_rate: 1e-3,
            ensemble_size: 2,
            seed: 7,
        };
        let (_, log) = train_qbasis(&data, &cfg).unwrap();
        let mut per_epoch = [0.0f64; 3];
        let mut counts = [0usize; 3];
        for row in &log {
            per_epoch[row.epoch] += row.loss;
            counts[row.epoch] += 1;
        }
        for e in 0..3 {
            per_epoch[e] /= counts[e] as f64;
        }
        assert!(per_epoch[0] > per_epoch[1] && per_epoch[1] > per_epoch[2], "{per_epoch:?}");
    }

    #[test]
    fn predict_psi_shapes_and_rows() {
        let data = small_cumulant_data(8);
        let (ens, _) = train_qbasis(&data, &tiny_cfg(8)).unwrap();
        let state = [0.5, -0.5];
        let actions = vec![0.1; 4 * 2];
        let psi = ens.predict_psi(&state, &actions).unwrap();
        assert_eq!((psi.rows(), psi.cols()), (2, 4));

        // single member: the row is exactly that member's forward output
        let single = QBasisEnsemble::from_parts(
            vec![ens.members()[0].clone()],
            2,
            2,
            4,
            4,
            0.9,
            0,
            vec![0.0],
            vec![0.0],
        )
        .unwrap();
        let mut input = state.to_vec();
        input.extend_from_slice(&actions);
        assert_eq!(single.predict_psi(&state, &actions).unwrap().row(0), ens.members()[0].forward(&input).unwrap().as_slice());

        // duplicated member: identical rows
        let dup = QBasisEnsemble::from_parts(
            vec![ens.members()[0].clone(), ens.members()[0].clone()],
            2,
            2,
            4,
            4,
            0.9,
            0,
            vec![0.0; 2],
            vec![0.0; 2],
        )
        .unwrap();
        let p = dup.predict_psi(&state, &actions).unwrap();
        assert_eq!(p.row(0), p.row(1));

        // wrong horizon is rejected
        assert!(ens.predict_psi(&state, &vec![0.1; 3 * 2]).is_err());
    }

    #[test]
    fn reward_windows_require_rewards() {
        let env = PointEnv::new(2).unwrap();
        let tasks = env.sample_goal_tasks(1, 0.1, 0);
        let d = collect_offline_dataset(&env, &tasks, 0.5, 1, 0).unwrap();
        assert!(reward_windows(&d.trajectories, 0.9, 4, 1).is_err());
    }

    #[test]
    fn zero_learning_rate_leaves_ensemble_bitwise_identical() {
        let data = small_cumulant_data(10);
        let (mut ens, _) = train_qbasis(&data, &tiny_cfg(10)).unwrap();
        let before = ens.members().to_vec();
        let weights = RewardWeights { w: vec![0.3; 5], lambda: 0.1, n_samples_seen: 10 };
        let windows = vec![RewardWindow {
            state: vec![0.1, 0.2],
            actions: vec![0.0; 8],
            discounted_reward: 1.0,
        }];
        let cfg = FinetuneConfig { learning_rate: 0.0, steps: 5, batch_size: 1, seed: 0 };
        finetune_qbasis(&mut ens, &weights, &windows, &cfg).unwrap();
        assert_eq!(before, ens.members());
    }

    #[test]
    fn exact_fixed_point_does_not_move() {
        // single member; choose rewards so that prediction == target exactly
        let data = small_cumulant_data(11);
        let cfg = QBasisTrainConfig { ensemble_size: 1, ..tiny_cfg(11) };
        let (mut ens, _) = train_qbasis(&data, &cfg).unwrap();
        let k = ens.k();
        let mut w = vec![0.0; k + 1];
        w[0] = 0.7;
        w[1] = -0.2;
        let weights = RewardWeights { w, lambda: 0.0, n_samples_seen: 1 };
        let bias = weights.w[k] * constant_feature_cumulant(ens.gamma(), ens.h());

        let state = vec![0.25, -0.75];
        let actions = vec![0.05; ens.h() * ens.action_dim()];
        let psi = ens.predict_psi(&state, &actions).unwrap();
        let target = crate::linalg::dot(psi.row(0), &weights.w[..k]) + bias;
        let windows =
            vec![RewardWindow { state, actions, discounted_reward: target }];
        let before = ens.members().to_vec();
        let cfg = FinetuneConfig { learning_rate: 1e-3, steps: 20, batch_size: 1, seed: 1 };
        let report = finetune_qbasis(&mut ens, &weights, &windows, &cfg).unwrap();
        assert!(report.initial_loss < 1e-20);
        let after = ens.members();
        let drift: f64 = before[0]
            .flatten()
            .iter()
            .zip(after[0].flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-8, "parameters moved by {drift}");
    }
}
