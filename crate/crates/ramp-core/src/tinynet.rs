//! Minimal dense-network kernel: multilayer perceptrons with exact gradients
//! and Adam updates, in 64-bit floats throughout.
//!
//! Hidden layers share one activation; the output layer is identity. The
//! checked entry points (`forward`, `backward`, `adam_step`) validate shapes
//! and return [`Result`]; the batched/scratch variants are the allocation-lean
//! hot path used by training loops and planners and only `debug_assert`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};
use crate::rng;

/// Hidden-layer activation. The output layer is always identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    fn init_scale(self, fan_in: usize) -> f64 {
        match self {
            Activation::Relu => (2.0 / fan_in as f64).sqrt(),
            Activation::Tanh => (1.0 / fan_in as f64).sqrt(),
        }
    }
}

/// Parameters of a fully-connected network.
///
/// Layer `i` maps `layer_sizes[i] -> layer_sizes[i+1]` with a row-major
/// weight matrix of shape `(layer_sizes[i+1], layer_sizes[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    activation: Activation,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Per-parameter values with the same shapes as [`MlpParams`]; used for
/// gradients and for Adam moments.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Gradients {
            weights: params
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for w in &mut self.weights {
            for v in w.as_mut_slice() {
                *v *= alpha;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= alpha;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(Matrix::all_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }
}

/// Reusable buffers for the allocation-free single-sample forward pass.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Activations recorded by [`MlpParams::forward_batch_cached`]; index 0 is
/// the input batch, index `i+1` the output of layer `i`.
pub struct BatchCache {
    pub activations: Vec<Matrix>,
}

impl MlpParams {
    /// Fan-in-scaled Gaussian initialization (`sqrt(2/fan_in)` for relu,
    /// `sqrt(1/fan_in)` for tanh), zero biases, deterministic in `seed`.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("layer_sizes needs at least input and output"));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("layer_sizes entries must be positive"));
        }
        let mut rng = rng::stream(seed, 0x6e65_74);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for win in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let scale = activation.init_scale(fan_in);
            let mut data = Vec::with_capacity(fan_out * fan_in);
            for _ in 0..fan_out * fan_in {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(scale * z);
            }
            weights.push(Matrix::from_vec(fan_out, fan_in, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpParams { layer_sizes: layer_sizes.to_vec(), activation, weights, biases })
    }

    /// Builds a network from explicit weights and biases (mainly for tests
    /// and deserialization). Shapes must be mutually consistent.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        activation: Activation,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(Error::invalid("inconsistent layer structure"));
        }
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.rows() != layer_sizes[i + 1] || w.cols() != layer_sizes[i] || b.len() != layer_sizes[i + 1] {
                return Err(Error::invalid(format!("layer {i} shape mismatch")));
            }
        }
        Ok(MlpParams { layer_sizes, activation, weights, biases })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Final linear layer, for callers that fold a fixed linear readout into
    /// the layer's weights instead of materializing the full output.
    pub fn output_layer(&self) -> (&Matrix, &[f64]) {
        (self.weights.last().unwrap(), self.biases.last().unwrap())
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Checked forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input length {} != {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut scratch = Scratch::default();
        Ok(self.forward_into(input, &mut scratch).to_vec())
    }

    /// Allocation-free forward pass into caller-owned scratch buffers.
    /// Shape misuse is a programmer error (`debug_assert`).
    pub fn forward_into<'s>(&self, input: &[f64], scratch: &'s mut Scratch) -> &'s [f64] {
        debug_assert_eq!(input.len(), self.input_dim());
        let max_width = *self.layer_sizes.iter().max().unwrap();
        scratch.a.resize(max_width, 0.0);
        scratch.b.resize(max_width, 0.0);
        scratch.a[..input.len()].copy_from_slice(input);
        let mut cur_len = input.len();
        let last = self.num_layers() - 1;
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            for (j, bias) in b.iter().enumerate() {
                let z = dot(w.row(j), &scratch.a[..cur_len]) + bias;
                scratch.b[j] = if i < last { self.activation.apply(z) } else { z };
            }
            cur_len = b.len();
            core::mem::swap(&mut scratch.a, &mut scratch.b);
        }
        &scratch.a[..cur_len]
    }

    /// Forward pass over a row-major batch.
    pub fn forward_batch(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::invalid("batch input width mismatch"));
        }
        Ok(self.run_batch(inputs, self.num_layers()))
    }

    /// Activations of the last hidden layer for a batch (the input of the
    /// final linear layer). For single-layer nets this is the input itself.
    pub fn forward_hidden_batch(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::invalid("batch input width mismatch"));
        }
        Ok(self.run_batch(inputs, self.num_layers() - 1))
    }

    fn run_batch(&self, inputs: &Matrix, n_layers: usize) -> Matrix {
        let last = self.num_layers() - 1;
        let mut cur = inputs.clone();
        for i in 0..n_layers {
            let (w, b) = (&self.weights[i], &self.biases[i]);
            let mut out = Matrix::zeros(cur.rows(), b.len());
            for r in 0..cur.rows() {
                let x = cur.row(r);
                let o = out.row_mut(r);
                for (j, bias) in b.iter().enumerate() {
                    let z = dot(w.row(j), x) + bias;
                    o[j] = if i < last { self.activation.apply(z) } else { z };
                }
            }
            cur = out;
        }
        cur
    }

    /// Forward pass recording per-layer activations for [`Self::backward_batch`].
    pub fn forward_batch_cached(&self, inputs: &Matrix) -> Result<(Matrix, BatchCache)> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::invalid("batch input width mismatch"));
        }
        let last = self.num_layers() - 1;
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        activations.push(inputs.clone());
        for i in 0..self.num_layers() {
            let (w, b) = (&self.weights[i], &self.biases[i]);
            let cur = activations.last().unwrap();
            let mut out = Matrix::zeros(cur.rows(), b.len());
            for r in 0..cur.rows() {
                let x = cur.row(r);
                let o = out.row_mut(r);
                for (j, bias) in b.iter().enumerate() {
                    let z = dot(w.row(j), x) + bias;
                    o[j] = if i < last { self.activation.apply(z) } else { z };
                }
            }
            activations.push(out);
        }
        let output = activations.last().unwrap().clone();
        Ok((output, BatchCache { activations }))
    }

    /// Exact gradients for a single sample given `dL/d(output)`.
    /// Returns the parameter gradients and `dL/d(input)`.
    pub fn backward(&self, input: &[f64], output_gradient: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        if input.len() != self.input_dim() {
            return Err(Error::invalid("backward: input length mismatch"));
        }
        if output_gradient.len() != self.output_dim() {
            return Err(Error::invalid("backward: output gradient length mismatch"));
        }
        let inputs = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let (_, cache) = self.forward_batch_cached(&inputs)?;
        let og = Matrix::from_vec(1, output_gradient.len(), output_gradient.to_vec())?;
        let (grads, input_grads) = self.backward_batch(&cache, &og);
        Ok((grads, input_grads.row(0).to_vec()))
    }

    /// Batched backward pass; gradients are summed over the batch rows.
    /// Returns parameter gradients and per-row input gradients.
    pub fn backward_batch(&self, cache: &BatchCache, output_gradient: &Matrix) -> (Gradients, Matrix) {
        let n_layers = self.num_layers();
        debug_assert_eq!(cache.activations.len(), n_layers + 1);
        debug_assert_eq!(output_gradient.cols(), self.output_dim());
        let batch = output_gradient.rows();
        let mut grads = Gradients::zeros_like(self);
        let mut delta = output_gradient.clone();
        for i in (0..n_layers).rev() {
            // output layer is identity; hidden layers need the activation derivative
            if i < n_layers - 1 {
                let act = &cache.activations[i + 1];
                for r in 0..batch {
                    let a = act.row(r);
                    let d = delta.row_mut(r);
                    for j in 0..d.len() {
                        d[j] *= self.activation.derivative_from_output(a[j]);
                    }
                }
            }
            let below = &cache.activations[i];
            let dw = &mut grads.weights[i];
            let db = &mut grads.biases[i];
            for r in 0..batch {
                let d = delta.row(r);
                let x = below.row(r);
                for (j, &dj) in d.iter().enumerate() {
                    if dj != 0.0 {
                        axpy(dj, x, dw.row_mut(j));
                    }
                    db[j] += dj;
                }
            }
            // propagate to the layer below
            let w = &self.weights[i];
            let mut prev = Matrix::zeros(batch, w.cols());
            for r in 0..batch {
                let d = delta.row(r);
                let p = prev.row_mut(r);
                for (j, &dj) in d.iter().enumerate() {
                    if dj != 0.0 {
                        axpy(dj, w.row(j), p);
                    }
                }
            }
            delta = prev;
        }
        (grads, delta)
    }

    /// Flattens parameters to one contiguous buffer: per layer, weights
    /// row-major then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    /// Inverse of [`Self::flatten`].
    pub fn from_flat(layer_sizes: &[usize], activation: Activation, flat: &[f64]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid("bad layer_sizes"));
        }
        let expected: usize = layer_sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        if flat.len() != expected {
            return Err(Error::invalid(format!(
                "flat length {} != expected {expected}",
                flat.len()
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut off = 0;
        for win in layer_sizes.windows(2) {
            let (nin, nout) = (win[0], win[1]);
            weights.push(Matrix::from_vec(nout, nin, flat[off..off + nout * nin].to_vec())?);
            off += nout * nin;
            biases.push(flat[off..off + nout].to_vec());
            off += nout;
        }
        Ok(MlpParams { layer_sizes: layer_sizes.to_vec(), activation, weights, biases })
    }

    /// Overwrites parameters from a flat buffer of matching length.
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::invalid("flat length mismatch"));
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let n = w.rows() * w.cols();
            w.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
            let nb = b.len();
            b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }
}

/// Adam optimizer state; moment shapes mirror the parameters they update.
#[derive(Debug, Clone)]
pub struct AdamState {
    step_count: u64,
    first_moment: Gradients,
    second_moment: Gradients,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with the conventional `beta1=0.9, beta2=0.999, eps=1e-8`.
    pub fn new(params: &MlpParams, learning_rate: f64) -> Self {
        AdamState {
            step_count: 0,
            first_moment: Gradients::zeros_like(params),
            second_moment: Gradients::zeros_like(params),
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One Adam update with bias correction. On non-finite gradients the
/// parameters and state are left untouched.
pub fn adam_step(params: &mut MlpParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.weights.len() != params.weights.len() {
        return Err(Error::invalid("adam_step: gradient layer count mismatch"));
    }
    if !grads.all_finite() {
        return Err(Error::numeric("non-finite gradients; parameters unchanged"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    let (lr, eps) = (state.learning_rate, state.epsilon);

    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for i in 0..params.weights.len() {
        update(
            params.weights[i].as_mut_slice(),
            grads.weights[i].as_slice(),
            state.first_moment.weights[i].as_mut_slice(),
            state.second_moment.weights[i].as_mut_slice(),
        );
        update(
            &mut params.biases[i],
            &grads.biases[i],
            &mut state.first_moment.biases[i],
            &mut state.second_moment.biases[i],
        );
    }
    Ok(())
}
