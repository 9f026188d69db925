//! Channel estimation on the per-tone pilot model.
//!
//! For the potential pilots `p = 1..P` the observation is
//! `y = sum_p diag(s_p) h_p + n`, i.e. `y = A h` with
//! `A = [diag(s_1) ... diag(s_P)]`. The MMSE estimate with the block-diagonal
//! frequency prior `R` is `h = R A^H (A R A^H + sigma2 I)^{-1} y`; only the
//! `Q x Q` matrix in the middle is ever factored.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::TdlProfile;
use crate::linalg::hermitian_solve;
use crate::pilots::PilotPool;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CeMethod {
    Mmse,
    /// Minimum-norm least squares, `h_p = conj(s_p) .* y / P`.
    Ls,
}

/// Frequency correlation `R[f1, f2] = sum_l P_l exp(-j 2 pi (f1 - f2) tau_l)`.
#[derive(Debug, Clone)]
pub struct FreqPrior {
    pub r: DMatrix<C64>,
}

pub fn cross_covariance(profile: &TdlProfile, rows_hz: &[f64], cols_hz: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(rows_hz.len(), cols_hz.len(), |a, b| {
        let df = rows_hz[a] - cols_hz[b];
        profile
            .powers()
            .iter()
            .zip(profile.delays_ns())
            .map(|(&p, &tau)| C64::from_polar(p, -2.0 * PI * df * tau * 1e-9))
            .sum()
    })
}

pub fn build_freq_prior(profile: &TdlProfile, tones_hz: &[f64]) -> FreqPrior {
    FreqPrior {
        r: cross_covariance(profile, tones_hz, tones_hz),
    }
}

/// Per-pilot gain estimates for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGainEstimate {
    pub method: CeMethod,
    /// Pilot indices, in the order of `h` and `g`.
    pub pilots: Vec<usize>,
    /// Estimated gains over the pilot tones.
    pub h: Vec<Vec<C64>>,
    /// Gains predicted at the data resources.
    pub g: Vec<Vec<C64>>,
}

impl ChannelGainEstimate {
    pub fn len(&self) -> usize {
        self.pilots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilots.is_empty()
    }

    /// Keeps the entries at `positions` (indices into `pilots`).
    pub fn select(&self, positions: &[usize]) -> ChannelGainEstimate {
        ChannelGainEstimate {
            method: self.method,
            pilots: positions.iter().map(|&i| self.pilots[i]).collect(),
            h: positions.iter().map(|&i| self.h[i].clone()).collect(),
            g: positions.iter().map(|&i| self.g[i].clone()).collect(),
        }
    }
}

/// Estimates `h_p` for every pilot sequence in `pilots`.
pub fn estimate_channels(
    y_pilot: &[C64],
    pilots: &[&[C64]],
    sigma2: f64,
    prior: &FreqPrior,
    method: CeMethod,
) -> Result<Vec<Vec<C64>>> {
    let z = whiten(y_pilot, pilots, sigma2, prior, method)?;
    Ok(pilots
        .iter()
        .map(|s| project(&z, s, &prior.r, method))
        .collect())
}

/// `z = (A R A^H + sigma2 I)^{-1} y` for MMSE, `y / P` for LS.
fn whiten(
    y_pilot: &[C64],
    pilots: &[&[C64]],
    sigma2: f64,
    prior: &FreqPrior,
    method: CeMethod,
) -> Result<Vec<C64>> {
    let q = y_pilot.len();
    if pilots.is_empty() {
        return Ok(vec![C64::new(0.0, 0.0); q]);
    }
    if sigma2 < 0.0 {
        return Err(Error::NegativeNoise(sigma2));
    }
    match method {
        CeMethod::Ls => {
            let inv = 1.0 / pilots.len() as f64;
            Ok(y_pilot.iter().map(|v| v * inv).collect())
        }
        CeMethod::Mmse => {
            let r = &prior.r;
            let mut c = DMatrix::from_fn(q, q, |m, n| {
                let mix: C64 = pilots.iter().map(|s| s[m] * s[n].conj()).sum();
                r[(m, n)] * mix
            });
            for i in 0..q {
                c[(i, i)] += sigma2;
            }
            let z = hermitian_solve(c, &DVector::from_column_slice(y_pilot), 1e-15)
                .ok_or(Error::SingularSystem)?;
            Ok(z.iter().copied().collect())
        }
    }
}

fn project(z: &[C64], s: &[C64], r: &DMatrix<C64>, method: CeMethod) -> Vec<C64> {
    let back: Vec<C64> = z.iter().zip(s).map(|(z, s)| z * s.conj()).collect();
    match method {
        CeMethod::Ls => back,
        CeMethod::Mmse => (r * DVector::from_column_slice(&back)).iter().copied().collect(),
    }
}

/// Channel estimator bound to a pool, a prior and the data tones.
#[derive(Debug, Clone)]
pub struct ChannelEstimator {
    method: CeMethod,
    prior: FreqPrior,
    /// Covariance between data tones and pilot tones, `T x Q`.
    r_data_pilot: DMatrix<C64>,
}

impl ChannelEstimator {
    pub fn new(method: CeMethod, profile: &TdlProfile, pilot_hz: &[f64], data_hz: &[f64]) -> Self {
        ChannelEstimator {
            method,
            prior: build_freq_prior(profile, pilot_hz),
            r_data_pilot: cross_covariance(profile, data_hz, pilot_hz),
        }
    }

    pub fn method(&self) -> CeMethod {
        self.method
    }

    pub fn prior(&self) -> &FreqPrior {
        &self.prior
    }

    /// Estimates the gains of `list` (pool indices) from one pilot observation.
    pub fn estimate(
        &self,
        y_pilot: &[C64],
        pool: &PilotPool,
        list: &[usize],
        sigma2: f64,
    ) -> Result<ChannelGainEstimate> {
        for &k in list {
            pool.check_index(k)?;
        }
        let seqs: Vec<&[C64]> = list.iter().map(|&k| pool.sequence(k)).collect();
        let z = whiten(y_pilot, &seqs, sigma2, &self.prior, self.method)?;
        let mut h = Vec::with_capacity(list.len());
        let mut g = Vec::with_capacity(list.len());
        for s in &seqs {
            let back: Vec<C64> = z.iter().zip(s.iter()).map(|(z, s)| z * s.conj()).collect();
            let back = DVector::from_column_slice(&back);
            match self.method {
                CeMethod::Mmse => {
                    h.push((&self.prior.r * &back).iter().copied().collect());
                    g.push((&self.r_data_pilot * &back).iter().copied().collect());
                }
                CeMethod::Ls => {
                    // no prior to extrapolate with: hold the last pilot tone
                    g.push(vec![back[back.len() - 1]; self.r_data_pilot.nrows()]);
                    h.push(back.iter().copied().collect());
                }
            }
        }
        Ok(ChannelGainEstimate {
            method: self.method,
            pilots: list.to_vec(),
            h,
            g,
        })
    }
}
