//! First-stage active UE detection.
//!
//! The pilot observation is treated as `y = S h + n` with one flat gain per
//! pilot. FOCUSS recovers a sparse `h`, and pilot `k` enters the potential
//! list when `|h_k|^2 >= lambda_aud`.
//!
//! Scale convention: `S` has unit-norm columns and `y` is divided by `sqrt(Q)`,
//! so an active UE with unit flat gain yields `|h_k|^2 = 1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::hermitian_solve;
use crate::pilots::{pilot_matrix, PilotPool};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocussParams {
    /// Diversity exponent, `0 < p <= 2`.
    pub p: f64,
    /// Tikhonov term added to the weighted Gram matrix.
    pub lambda_reg: f64,
    pub max_iter: usize,
    /// Stop once `||h_new - h|| <= tol * ||h||`.
    pub tol: f64,
}

impl Default for FocussParams {
    fn default() -> Self {
        FocussParams {
            p: 1.0,
            lambda_reg: 0.0,
            max_iter: 30,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocussOutcome {
    pub h: Vec<C64>,
    pub iterations: usize,
    pub converged: bool,
    /// The reweighted system became singular; `h` is the last good iterate.
    pub singular: bool,
}

/// Regularized FOCUSS, started from the matched filter `S^H y`.
///
/// Each step solves `h = W (W G W + lambda I)^{-1} W S^H y` with
/// `G = S^H S` and `W = diag(|h|^{(2-p)/2})`, which equals
/// `D S^H (S D S^H + lambda I)^{-1} y` for `D = W^2` but only needs a
/// `K x K` Hermitian solve.
pub fn focuss(s: &DMatrix<C64>, y: &[C64], params: &FocussParams) -> FocussOutcome {
    let gram = s.adjoint() * s;
    focuss_with_gram(s, &gram, y, params)
}

pub(crate) fn focuss_with_gram(
    s: &DMatrix<C64>,
    gram: &DMatrix<C64>,
    y: &[C64],
    params: &FocussParams,
) -> FocussOutcome {
    let k = s.ncols();
    let b = s.adjoint() * DVector::from_column_slice(y);
    let zero = C64::new(0.0, 0.0);
    if b.iter().all(|v| *v == zero) {
        return FocussOutcome {
            h: vec![zero; k],
            iterations: 0,
            converged: true,
            singular: false,
        };
    }
    let exponent = (2.0 - params.p) / 2.0;
    let mut h = b.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut singular = false;
    while iterations < params.max_iter {
        let w: Vec<f64> = h.iter().map(|v| v.norm().powf(exponent)).collect();
        let mut m = DMatrix::from_fn(k, k, |i, j| gram[(i, j)] * (w[i] * w[j]));
        for i in 0..k {
            m[(i, i)] += params.lambda_reg;
        }
        let rhs = DVector::from_fn(k, |i, _| b[i] * w[i]);
        let Some(z) = hermitian_solve(m, &rhs, 1e-14) else {
            singular = true;
            break;
        };
        let next = DVector::from_fn(k, |i, _| z[i] * w[i]);
        iterations += 1;
        let change = (&next - &h).norm();
        let scale = h.norm();
        h = next;
        if change <= params.tol * scale {
            converged = true;
            break;
        }
    }
    FocussOutcome {
        h: h.iter().copied().collect(),
        iterations,
        converged,
        singular,
    }
}

/// Indices with `|h_k|^2 >= lambda_aud`, ascending.
pub fn threshold_aud(h: &[C64], lambda_aud: f64) -> Vec<usize> {
    let values: Vec<f64> = h.iter().map(|v| v.norm_sqr()).collect();
    select_at_least(&values, lambda_aud)
}

/// Indices whose value is `>= threshold`, ascending.
pub fn select_at_least(values: &[f64], threshold: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .map(|(k, _)| k)
        .collect()
}

/// Output of the detector for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityEstimate {
    pub h: Vec<C64>,
    /// `|h_k|^2` per pilot.
    pub char_values: Vec<f64>,
    pub converged: bool,
}

impl ActivityEstimate {
    pub fn potential_list(&self, lambda_aud: f64) -> Vec<usize> {
        select_at_least(&self.char_values, lambda_aud)
    }
}

/// Sparse-recovery algorithm used by the detector. Only FOCUSS exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparseRecovery {
    Focuss(FocussParams),
}

/// Detector bound to one pilot pool.
#[derive(Debug, Clone)]
pub struct ActivityDetector {
    s: DMatrix<C64>,
    gram: DMatrix<C64>,
    q: usize,
    recovery: SparseRecovery,
    /// Explicit regularizer; `None` uses the noise variance of the
    /// normalized observation, `sigma2 / Q`.
    lambda_reg: Option<f64>,
}

impl ActivityDetector {
    pub fn new(pool: &PilotPool, recovery: SparseRecovery, lambda_reg: Option<f64>) -> Self {
        let s = pilot_matrix(pool);
        let gram = s.adjoint() * &s;
        ActivityDetector {
            s,
            gram,
            q: pool.q(),
            recovery,
            lambda_reg,
        }
    }

    pub fn pilot_matrix(&self) -> &DMatrix<C64> {
        &self.s
    }

    /// Runs sparse recovery on a raw (unnormalized) pilot observation.
    pub fn detect(&self, y_pilot: &[C64], sigma2: f64) -> ActivityEstimate {
        let scale = (self.q as f64).sqrt().recip();
        let y: Vec<C64> = y_pilot.iter().map(|v| v * scale).collect();
        let SparseRecovery::Focuss(mut params) = self.recovery;
        params.lambda_reg = self.lambda_reg.unwrap_or(sigma2 / self.q as f64);
        let out = focuss_with_gram(&self.s, &self.gram, &y, &params);
        ActivityEstimate {
            char_values: out.h.iter().map(|v| v.norm_sqr()).collect(),
            h: out.h,
            converged: out.converged,
        }
    }
}
