//! Test-time reward regression onto random features — batch ridge and
//! recursive least squares — and recombination of the Q-basis into a
//! Q-estimate for the new task.
//!
//! Conventions: feature rows carry the constant bias feature as their LAST
//! entry. Batch ridge minimizes `(1/n) sum (r - phi^T w)^2 + lambda ||w||^2`,
//! i.e. solves `(Phi^T Phi + n lambda I) w = Phi^T r`. RLS with `P0 = I/l`
//! maintains the solution of the same system with absolute Tikhonov weight
//! `l`, so a prefix of `n` samples matches batch ridge at `lambda = l/n`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::qbasis::QBasisEnsemble;

/// Ridge solution over K features plus the bias coefficient (last entry).
#[derive(Debug, Clone, PartialEq)]
pub struct RewardWeights {
    pub w: Vec<f64>,
    pub lambda: f64,
    pub n_samples_seen: usize,
}

impl RewardWeights {
    pub fn k(&self) -> usize {
        self.w.len() - 1
    }

    pub fn bias(&self) -> f64 {
        *self.w.last().unwrap()
    }

    /// `phi^T w` for a feature row that already carries the bias entry.
    pub fn predict(&self, phi_with_bias: &[f64]) -> f64 {
        linalg::dot(&self.w, phi_with_bias)
    }
}

/// Discounted cumulant of the constant feature: `sum_{h=1..H} gamma^{h-1}`.
pub fn constant_feature_cumulant(gamma: f64, h: usize) -> f64 {
    if gamma == 1.0 {
        return h as f64;
    }
    (1.0 - gamma.powi(h as i32)) / (1.0 - gamma)
}

/// Batch ridge regression: `w = (Phi^T Phi + n lambda I)^{-1} Phi^T r`,
/// solved by Cholesky. The achieved normal-equation residual is verified to
/// be below `1e-8 * (||Phi^T r|| + 1)`.
pub fn ridge_fit(features: &Matrix, rewards: &[f64], lambda: f64) -> Result<RewardWeights> {
    let n = features.rows();
    let p = features.cols();
    if n == 0 || p == 0 {
        return Err(Error::invalid("ridge_fit: empty system"));
    }
    if rewards.len() != n {
        return Err(Error::invalid("ridge_fit: reward count mismatch"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid("ridge_fit: lambda must be non-negative"));
    }
    if !features.all_finite() || rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("ridge_fit: non-finite inputs"));
    }

    let (mut a, b) = linalg::gram(features, rewards);
    let ridge = n as f64 * lambda;
    for i in 0..p {
        let v = a.get(i, i) + ridge;
        a.set(i, i, v);
    }
    let w = linalg::solve_spd(&a, &b)?;

    let achieved = a.mul_vec(&w);
    let res: f64 = achieved.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = linalg::dot(&b, &b).sqrt() + 1.0;
    if res > 1e-8 * scale {
        return Err(Error::numeric(format!(
            "ridge_fit: normal-equation residual {res:.3e} above tolerance"
        )));
    }
    Ok(RewardWeights { w, lambda, n_samples_seen: n })
}

/// Recursive least squares via rank-1 Sherman-Morrison updates.
///
/// `P` is the inverse of the regularized Gram matrix, kept symmetric by
/// construction; `lambda` is the absolute Tikhonov weight (`P0 = I/lambda`).
#[derive(Debug, Clone)]
pub struct RlsState {
    p: Matrix,
    b: Vec<f64>,
    w: Vec<f64>,
    pub lambda: f64,
    pub n_samples_seen: usize,
}

/// Fresh RLS state over `k` features plus bias (`k+1` coefficients).
pub fn rls_init(k: usize, lambda: f64) -> Result<RlsState> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("rls_init: lambda must be positive"));
    }
    let p = k + 1;
    let mut pm = Matrix::zeros(p, p);
    for i in 0..p {
        pm.set(i, i, 1.0 / lambda);
    }
    Ok(RlsState { p: pm, b: vec![0.0; p], w: vec![0.0; p], lambda, n_samples_seen: 0 })
}

/// One rank-1 update with a feature row (bias included) and its reward.
pub fn rls_update(state: &mut RlsState, phi_row: &[f64], reward: f64) -> Result<()> {
    let p = state.w.len();
    if phi_row.len() != p {
        return Err(Error::invalid(format!(
            "rls_update: feature row length {} != {p}",
            phi_row.len()
        )));
    }
    if phi_row.iter().any(|v| !v.is_finite()) || !reward.is_finite() {
        return Err(Error::invalid("rls_update: non-finite input"));
    }
    let u = state.p.mul_vec(phi_row);
    let denom = 1.0 + linalg::dot(phi_row, &u);
    // symmetric rank-1 downdate: P -= u u^T / denom
    for i in 0..p {
        let ui = u[i] / denom;
        if ui != 0.0 {
            let row = state.p.row_mut(i);
            for j in 0..p {
                row[j] -= ui * u[j];
            }
        }
    }
    let err = reward - linalg::dot(phi_row, &state.w);
    for i in 0..p {
        state.w[i] += u[i] / denom * err;
        state.b[i] += phi_row[i] * reward;
    }
    state.n_samples_seen += 1;
    Ok(())
}

impl RlsState {
    pub fn weights(&self) -> RewardWeights {
        RewardWeights {
            w: self.w.clone(),
            lambda: self.lambda,
            n_samples_seen: self.n_samples_seen,
        }
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }
}

/// Q-estimate for the fitted reward: ensemble mean of `sum_k w_k psi_k`
/// plus the bias coefficient times the analytic cumulant of the constant
/// feature.
pub fn q_estimate(
    ensemble: &QBasisEnsemble,
    weights: &RewardWeights,
    state: &[f64],
    actions: &[f64],
) -> Result<f64> {
    let k = ensemble.k();
    if weights.w.len() != k + 1 {
        return Err(Error::invalid(format!(
            "q_estimate: {} weights for {k} features (+bias)",
            weights.w.len()
        )));
    }
    let psi = ensemble.predict_psi(state, actions)?;
    let bias_term = weights.bias() * constant_feature_cumulant(ensemble.gamma(), ensemble.h());
    let mut acc = 0.0;
    for e in 0..psi.rows() {
        acc += linalg::dot(psi.row(e), &weights.w[..k]);
    }
    Ok(acc / psi.rows() as f64 + bias_term)
}

/// Coefficient of determination of predictions against observations.
/// Returns 0 when the observations have (numerically) no variance.
pub fn r_squared(predictions: &[f64], observations: &[f64]) -> f64 {
    debug_assert_eq!(predictions.len(), observations.len());
    let (mean, var) = linalg::mean_var(observations);
    if var < 1e-12 {
        return 0.0;
    }
    let n = observations.len() as f64;
    let mse = predictions
        .iter()
        .zip(observations)
        .map(|(p, o)| (p - o) * (p - o))
        .sum::<f64>()
        / n;
    let _ = mean;
    1.0 - mse / var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn closed_form_identity_example() {
        // Phi = I2, r = (2, 4), lambda = 0.5, n = 2:
        // (I + 2*0.5*I)^{-1} r = r / 2
        let phi = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let w = ridge_fit(&phi, &[2.0, 4.0], 0.5).unwrap();
        assert!((w.w[0] - 1.0).abs() < 1e-12);
        assert!((w.w[1] - 2.0).abs() < 1e-12);
        assert_eq!(w.n_samples_seen, 2);
    }

    #[test]
    fn huge_lambda_shrinks_weights() {
        let mut r = rng::stream(1, 0);
        let rows: alloc::vec::Vec<alloc::vec::Vec<f64>> = (0..20)
            .map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let phi = Matrix::from_rows(&rows).unwrap();
        let rewards: alloc::vec::Vec<f64> = (0..20).map(|_| r.random_range(-1.0..1.0)).collect();
        let w = ridge_fit(&phi, &rewards, 1e6).unwrap();
        let wn = linalg::dot(&w.w, &w.w).sqrt();
        let rn = linalg::dot(&rewards, &rewards).sqrt();
        assert!(wn < 1e-4 * rn, "||w|| = {wn}, ||r|| = {rn}");
    }

    #[test]
    fn exact_interpolation_at_zero_lambda() {
        let mut r = rng::stream(2, 0);
        let true_w = [0.5, -1.25, 2.0];
        let rows: alloc::vec::Vec<alloc::vec::Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let phi = Matrix::from_rows(&rows).unwrap();
        let rewards: alloc::vec::Vec<f64> =
            rows.iter().map(|row| linalg::dot(row, &true_w)).collect();
        let w = ridge_fit(&phi, &rewards, 0.0).unwrap();
        for i in 0..3 {
            assert!((w.w[i] - true_w[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_zero_lambda_names_deficiency() {
        // duplicate column -> rank deficient
        let phi = Matrix::from_vec(3, 2, vec![1.0, 1.0, 2.0, 2.0, -1.0, -1.0]).unwrap();
        match ridge_fit(&phi, &[1.0, 2.0, -1.0], 0.0) {
            Err(Error::RankDeficient { .. }) => {}
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        // regularization cures it
        assert!(ridge_fit(&phi, &[1.0, 2.0, -1.0], 0.1).is_ok());
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let phi = Matrix::from_vec(1, 2, vec![f64::NAN, 1.0]).unwrap();
        assert!(ridge_fit(&phi, &[1.0], 0.1).is_err());
        let phi = Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        assert!(ridge_fit(&phi, &[f64::INFINITY], 0.1).is_err());
        let mut st = rls_init(1, 1.0).unwrap();
        assert!(rls_update(&mut st, &[f64::NAN, 1.0], 0.0).is_err());
    }

    #[test]
    fn rls_zero_updates_is_zero_weights() {
        let st = rls_init(3, 0.5).unwrap();
        assert_eq!(st.w(), &[0.0; 4]);
        assert_eq!(st.n_samples_seen, 0);
    }

    #[test]
    fn rls_single_sherman_morrison_step_by_hand() {
        // phi = e1, r = 1, lambda = 1, P0 = I: w = e1 / (1 + 1) = 0.5 e1
        let mut st = rls_init(1, 1.0).unwrap();
        rls_update(&mut st, &[1.0, 0.0], 1.0).unwrap();
        assert!((st.w()[0] - 0.5).abs() < 1e-15);
        assert_eq!(st.w()[1], 0.0);
    }

    #[test]
    fn rls_matches_batch_ridge_on_every_prefix() {
        let k = 6;
        let lambda_abs = 2.5;
        let mut st = rls_init(k, lambda_abs).unwrap();
        let mut r = rng::stream(3, 0);
        let mut rows: alloc::vec::Vec<alloc::vec::Vec<f64>> = alloc::vec::Vec::new();
        let mut rewards = alloc::vec::Vec::new();
        for n in 1..=500usize {
            let mut row: alloc::vec::Vec<f64> =
                (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
            row.push(1.0); // bias feature
            let reward = r.random_range(-2.0..2.0);
            rls_update(&mut st, &row, reward).unwrap();
            rows.push(row);
            rewards.push(reward);

            if n % 97 == 0 || n == 1 || n == 500 {
                let phi = Matrix::from_rows(&rows).unwrap();
                // match the lambda*n convention: absolute weight / n
                let batch = ridge_fit(&phi, &rewards, lambda_abs / n as f64).unwrap();
                let diff: f64 = st
                    .w()
                    .iter()
                    .zip(&batch.w)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let norm = linalg::dot(&batch.w, &batch.w).sqrt();
                assert!(diff <= 1e-8 * (1.0 + norm), "prefix {n}: drift {diff}");
            }
        }
        assert_eq!(st.n_samples_seen, 500);
    }

    #[test]
    fn constant_cumulant_values() {
        assert!((constant_feature_cumulant(0.5, 3) - 1.75).abs() < 1e-15);
        assert_eq!(constant_feature_cumulant(0.0, 5), 1.0);
    }

    #[test]
    fn r_squared_basics() {
        let obs = [1.0, 2.0, 3.0, 4.0];
        assert!((r_squared(&obs, &obs) - 1.0).abs() < 1e-15);
        assert_eq!(r_squared(&[5.0, 5.0], &[3.0, 3.0]), 0.0); // no variance
    }
}
