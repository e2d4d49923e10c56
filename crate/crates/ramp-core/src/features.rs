//! Random feature maps over `(state, action)` and their discounted
//! accumulation along trajectory windows — the self-supervised targets the
//! Q-basis ensemble is trained on.
//!
//! Feature parameters are drawn once at construction and never trained.
//! `random_mlp` outputs pass through `tanh`, so `|phi| <= 1` holds for that
//! variant by construction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::envs::OfflineDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::tinynet::{Activation, MlpParams, Scratch};

pub const RANDOM_MLP_HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    RandomMlp,
    GaussianLinear,
    Polynomial,
}

#[derive(Debug, Clone)]
enum MapBody {
    /// K independent nets, each `(sd+ad) -> 32 -> 32 -> 1`, output squashed
    /// by tanh.
    RandomMlp { nets: Vec<MlpParams> },
    /// `K x (sd+ad)` matrix of i.i.d. standard normals.
    GaussianLinear { matrix: Matrix },
    /// Monomials of `[1; s; a]` up to degree 2 in graded-lex order.
    Polynomial,
}

/// A frozen map `(state, action) -> R^K`.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    body: MapBody,
    k: usize,
    state_dim: usize,
    action_dim: usize,
    seed: u64,
}

/// Number of degree `<= 2` monomials in `d` variables (constant included).
pub fn polynomial_feature_count(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

impl FeatureMap {
    /// Builds a feature map. For `Polynomial` the requested `k` is ignored:
    /// the dimension is implied by `state_dim + action_dim`.
    pub fn new(
        kind: FeatureKind,
        k: usize,
        state_dim: usize,
        action_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::invalid("feature map needs positive dimensions"));
        }
        if k == 0 {
            return Err(Error::invalid("feature count must be at least 1"));
        }
        let d = state_dim + action_dim;
        let body = match kind {
            FeatureKind::RandomMlp => {
                let sizes = [d, RANDOM_MLP_HIDDEN, RANDOM_MLP_HIDDEN, 1];
                let nets = (0..k)
                    .map(|i| {
                        MlpParams::init(&sizes, Activation::Relu, rng::derive_seed(seed, i as u64))
                    })
                    .collect::<Result<Vec<_>>>()?;
                MapBody::RandomMlp { nets }
            }
            FeatureKind::GaussianLinear => {
                let mut r = rng::stream(seed, 0x6761_7573);
                let data: Vec<f64> = (0..k * d).map(|_| StandardNormal.sample(&mut r)).collect();
                MapBody::GaussianLinear { matrix: Matrix::from_vec(k, d, data)? }
            }
            FeatureKind::Polynomial => MapBody::Polynomial,
        };
        let k = match &body {
            MapBody::Polynomial => polynomial_feature_count(d),
            _ => k,
        };
        Ok(FeatureMap { body, k, state_dim, action_dim, seed })
    }

    /// Wraps externally built nets (deserialization, tests). Each net must
    /// map `state_dim + action_dim` to a single output.
    pub fn from_mlps(
        nets: Vec<MlpParams>,
        state_dim: usize,
        action_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if nets.is_empty() {
            return Err(Error::invalid("need at least one net"));
        }
        for n in &nets {
            if n.input_dim() != state_dim + action_dim || n.output_dim() != 1 {
                return Err(Error::invalid("feature net shape mismatch"));
            }
        }
        let k = nets.len();
        Ok(FeatureMap { body: MapBody::RandomMlp { nets }, k, state_dim, action_dim, seed })
    }

    /// Wraps an explicit projection matrix (deserialization, tests).
    pub fn from_gaussian(
        matrix: Matrix,
        state_dim: usize,
        action_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if matrix.cols() != state_dim + action_dim || matrix.rows() == 0 {
            return Err(Error::invalid("projection matrix shape mismatch"));
        }
        let k = matrix.rows();
        Ok(FeatureMap { body: MapBody::GaussianLinear { matrix }, k, state_dim, action_dim, seed })
    }

    pub fn polynomial(state_dim: usize, action_dim: usize) -> Result<Self> {
        FeatureMap::new(FeatureKind::Polynomial, 1, state_dim, action_dim, 0)
    }

    pub fn kind(&self) -> FeatureKind {
        match &self.body {
            MapBody::RandomMlp { .. } => FeatureKind::RandomMlp,
            MapBody::GaussianLinear { .. } => FeatureKind::GaussianLinear,
            MapBody::Polynomial => FeatureKind::Polynomial,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The underlying nets, when this is a `random_mlp` map.
    pub fn mlp_nets(&self) -> Option<&[MlpParams]> {
        match &self.body {
            MapBody::RandomMlp { nets } => Some(nets),
            _ => None,
        }
    }

    /// The projection matrix, when this is a `gaussian_linear` map.
    pub fn gaussian_matrix(&self) -> Option<&Matrix> {
        match &self.body {
            MapBody::GaussianLinear { matrix } => Some(matrix),
            _ => None,
        }
    }

    /// `phi(s, a)`, checked.
    pub fn phi(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim || action.len() != self.action_dim {
            return Err(Error::invalid(format!(
                "phi: got ({}, {}), expected ({}, {})",
                state.len(),
                action.len(),
                self.state_dim,
                self.action_dim
            )));
        }
        let mut out = vec![0.0; self.k];
        let mut scratch = PhiScratch::default();
        self.phi_into(state, action, &mut out, &mut scratch);
        Ok(out)
    }

    /// `phi(s, a)` appended with the constant bias feature `1.0`.
    pub fn phi_with_bias(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.phi(state, action)?;
        v.push(1.0);
        Ok(v)
    }

    /// Allocation-lean evaluation into `out` (length `k`).
    pub fn phi_into(&self, state: &[f64], action: &[f64], out: &mut [f64], scratch: &mut PhiScratch) {
        debug_assert_eq!(out.len(), self.k);
        let input = &mut scratch.input;
        input.clear();
        input.extend_from_slice(state);
        input.extend_from_slice(action);
        match &self.body {
            MapBody::RandomMlp { nets } => {
                for (o, net) in out.iter_mut().zip(nets) {
                    let y = net.forward_into(input, &mut scratch.net)[0];
                    *o = y.tanh();
                }
            }
            MapBody::GaussianLinear { matrix } => {
                for (o, row) in out.iter_mut().zip(matrix.iter_rows()) {
                    *o = crate::linalg::dot(row, input);
                }
            }
            MapBody::Polynomial => {
                let d = input.len();
                let mut idx = 0;
                out[idx] = 1.0;
                idx += 1;
                for i in 0..d {
                    out[idx] = input[i];
                    idx += 1;
                }
                for i in 0..d {
                    for j in i..d {
                        out[idx] = input[i] * input[j];
                        idx += 1;
                    }
                }
                debug_assert_eq!(idx, self.k);
            }
        }
    }
}

/// Reusable buffers for [`FeatureMap::phi_into`].
#[derive(Debug, Default, Clone)]
pub struct PhiScratch {
    input: Vec<f64>,
    net: Scratch,
}

/// `sum_{j=0..h-1} gamma^j * phi(s[j], a[j])` over a trajectory segment.
pub fn discounted_feature_sum(
    map: &FeatureMap,
    states: &[Vec<f64>],
    actions: &[Vec<f64>],
    gamma: f64,
    h: usize,
) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    if states.len() < h || actions.len() < h {
        return Err(Error::invalid(format!(
            "segment shorter than horizon: {} states / {} actions < {h}",
            states.len(),
            actions.len()
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid("gamma must lie in [0, 1)"));
    }
    let mut phis = Vec::with_capacity(h);
    for j in 0..h {
        phis.push(map.phi(&states[j], &actions[j])?);
    }
    Ok(discounted_sum_of(&phis, gamma))
}

/// Shared accumulation order so stored targets recompute bitwise.
fn discounted_sum_of(phis: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let k = phis[0].len();
    let mut acc = vec![0.0; k];
    let mut scale = 1.0;
    for p in phis {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += scale * v;
        }
        scale *= gamma;
    }
    acc
}

/// Supervised pairs `((s_t, a_{t:t+H-1}), y)` extracted from a dataset with
/// the given window stride. Stored flat: one input row is
/// `[state, actions...]` of width `state_dim + h*action_dim`.
#[derive(Debug, Clone)]
pub struct CumulantDataset {
    inputs: Matrix,
    targets: Matrix,
    h: usize,
    gamma: f64,
    state_dim: usize,
    action_dim: usize,
}

impl CumulantDataset {
    /// Assembles a dataset from raw matrices (tests, synthetic targets).
    pub fn from_parts(
        inputs: Matrix,
        targets: Matrix,
        h: usize,
        gamma: f64,
        state_dim: usize,
        action_dim: usize,
    ) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::invalid("inputs and targets row counts differ"));
        }
        if inputs.cols() != state_dim + h * action_dim {
            return Err(Error::invalid("input width inconsistent with dims"));
        }
        Ok(CumulantDataset { inputs, targets, h, gamma, state_dim, action_dim })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k(&self) -> usize {
        self.targets.cols()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Splits off every `every`-th row as a held-out set (deterministic).
    pub fn split_holdout(&self, every: usize) -> (CumulantDataset, CumulantDataset) {
        let mut train_in = Vec::new();
        let mut train_t = Vec::new();
        let mut hold_in = Vec::new();
        let mut hold_t = Vec::new();
        for r in 0..self.len() {
            let (di, dt) = if every > 0 && r % every == every - 1 {
                (&mut hold_in, &mut hold_t)
            } else {
                (&mut train_in, &mut train_t)
            };
            di.extend_from_slice(self.inputs.row(r));
            dt.extend_from_slice(self.targets.row(r));
        }
        let make = |i: Vec<f64>, t: Vec<f64>| CumulantDataset {
            inputs: Matrix::from_vec(i.len() / self.input_dim(), self.input_dim(), i).unwrap(),
            targets: Matrix::from_vec(t.len() / self.k(), self.k(), t).unwrap(),
            h: self.h,
            gamma: self.gamma,
            state_dim: self.state_dim,
            action_dim: self.action_dim,
        };
        (make(train_in, train_t), make(hold_in, hold_t))
    }
}

/// Builds the cumulant dataset: for each trajectory and each start index
/// `t in {0, stride, 2*stride, ...}` with `t + h <= episode_length`, emits
/// the window input and its discounted feature sum.
pub fn build_cumulant_dataset(
    dataset: &OfflineDataset,
    map: &FeatureMap,
    gamma: f64,
    h: usize,
    stride: usize,
) -> Result<CumulantDataset> {
    if stride < 1 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if h == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid("gamma must lie in [0, 1)"));
    }
    if map.state_dim() != dataset.spec.state_dim || map.action_dim() != dataset.spec.action_dim {
        return Err(Error::invalid("feature map dims do not match dataset"));
    }
    let k = map.k();
    let in_dim = dataset.spec.state_dim + h * dataset.spec.action_dim;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut scratch = PhiScratch::default();
    let mut n = 0usize;
    for traj in &dataset.trajectories {
        if traj.len() < h {
            return Err(Error::invalid(format!(
                "trajectory length {} shorter than horizon {h}",
                traj.len()
            )));
        }
        // evaluate phi once per step, then sum windows from the cache
        let mut phis = Vec::with_capacity(traj.len());
        for t in 0..traj.len() {
            let mut row = vec![0.0; k];
            map.phi_into(&traj.states[t], &traj.actions[t], &mut row, &mut scratch);
            phis.push(row);
        }
        let mut t = 0;
        while t + h <= traj.len() {
            inputs.extend_from_slice(&traj.states[t]);
            for a in &traj.actions[t..t + h] {
                inputs.extend_from_slice(a);
            }
            targets.extend_from_slice(&discounted_sum_of(&phis[t..t + h], gamma));
            n += 1;
            t += stride;
        }
    }
    Ok(CumulantDataset {
        inputs: Matrix::from_vec(n, in_dim, inputs)?,
        targets: Matrix::from_vec(n, k, targets)?,
        h,
        gamma,
        state_dim: dataset.spec.state_dim,
        action_dim: dataset.spec.action_dim,
    })
}
