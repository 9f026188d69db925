//! Refined activity detection.
//!
//! Every potential UE's estimated per-tone gain vector is reduced to a
//! scalar `F` (its 1- or 2-norm) and compared with an SNR-dependent
//! threshold `tau(SNR)`. The threshold curve is calibrated offline from
//! trials with known UE status: at each SNR, `tau` is the `q`-quantile of
//! the active UEs' `F`, so at most a fraction `q` of true actives is
//! sacrificed, and the curve is then made non-increasing in SNR.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ce::ChannelGainEstimate;
use crate::config::SimConfig;
use crate::harness::{par_trials, SimContext};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L1,
    L2,
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            _ => Err(Error::Config(format!("unknown norm `{s}`"))),
        }
    }
}

/// The characteristic value `F` of one gain vector.
pub fn f_value(h: &[C64], norm: NormKind) -> f64 {
    match norm {
        NormKind::L1 => h.iter().map(|v| v.norm()).sum(),
        NormKind::L2 => h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt(),
    }
}

/// Empirical `tau(SNR)` on a dB grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdCurve {
    pub norm: NormKind,
    pub q: f64,
    pub snr_db: Vec<f64>,
    pub tau: Vec<f64>,
    /// Calibration trials per SNR point.
    pub trials: u64,
    pub seed: u64,
}

impl ThresholdCurve {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Curve(m.to_string()));
        if self.snr_db.is_empty() || self.snr_db.len() != self.tau.len() {
            return bad("grid and tau must be non-empty and of equal length");
        }
        if self.snr_db.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("SNR grid must be strictly increasing");
        }
        if self.tau.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return bad("tau must be finite and non-negative");
        }
        if self.tau.windows(2).any(|w| w[1] > w[0]) {
            return bad("tau must be non-increasing in SNR");
        }
        Ok(())
    }

    /// Piecewise-linear in dB, held constant outside the grid.
    pub fn tau_at(&self, snr_db: f64) -> f64 {
        let (x, y) = (&self.snr_db, &self.tau);
        let last = x.len() - 1;
        if snr_db <= x[0] {
            return y[0];
        }
        if snr_db >= x[last] {
            return y[last];
        }
        let i = x.partition_point(|&v| v <= snr_db) - 1;
        let w = (snr_db - x[i]) / (x[i + 1] - x[i]);
        y[i] + w * (y[i + 1] - y[i])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let curve: ThresholdCurve = serde_json::from_str(&text)?;
        curve.validate()?;
        Ok(curve)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Result of the refinement stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedList {
    /// Pool indices of the retained UEs.
    pub active_indices: Vec<usize>,
    /// Positions of the retained UEs within the input estimate.
    pub positions: Vec<usize>,
    /// `F` of every potential UE, in input order.
    pub f_values: Vec<f64>,
    pub tau: f64,
}

/// Keeps the potential UEs with `F >= tau(snr_db)`.
pub fn raud_filter(estimates: &ChannelGainEstimate, curve: &ThresholdCurve, snr_db: f64) -> RefinedList {
    let f_values: Vec<f64> = estimates.h.iter().map(|h| f_value(h, curve.norm)).collect();
    let tau = curve.tau_at(snr_db);
    let positions = crate::aud::select_at_least(&f_values, tau);
    RefinedList {
        active_indices: positions.iter().map(|&i| estimates.pilots[i]).collect(),
        positions,
        f_values,
        tau,
    }
}

/// Largest threshold losing at most `floor(q n)` of the samples: the
/// `(floor(q n) + 1)`-th smallest value.
pub fn quantile_threshold(samples: &[f64], q: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((q * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
    Some(sorted[k])
}

/// Least-squares non-increasing fit (pool adjacent violators).
pub fn fit_non_increasing(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count), each block mean must not exceed its predecessor
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s1 / n1 as f64 <= s0 / n0 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, n)| std::iter::repeat_n(s / n as f64, n))
        .collect()
}

/// `F` samples of known status at one SNR point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationSamples {
    pub snr_db: f64,
    pub active: Vec<f64>,
    pub inactive: Vec<f64>,
}

/// Turns per-SNR samples into a validated curve.
pub fn fit_threshold_curve(
    samples: &[CalibrationSamples],
    norm: NormKind,
    q: f64,
    trials: u64,
    seed: u64,
) -> Result<ThresholdCurve> {
    let mut raw = Vec::with_capacity(samples.len());
    for s in samples {
        let degenerate = |reason: &str| Error::DegenerateCalibration {
            snr_db: s.snr_db,
            reason: reason.to_string(),
        };
        if s.inactive.is_empty() {
            return Err(degenerate("no inactive samples"));
        }
        let tau = quantile_threshold(&s.active, q).ok_or_else(|| degenerate("no active samples"))?;
        raw.push(tau);
    }
    let curve = ThresholdCurve {
        norm,
        q,
        snr_db: samples.iter().map(|s| s.snr_db).collect(),
        tau: fit_non_increasing(&raw),
        trials,
        seed,
    };
    curve.validate()?;
    Ok(curve)
}

/// Smallest trial count per SNR point accepted by [`calibrate_threshold`].
pub const MIN_CALIBRATION_TRIALS: u64 = 500;

/// Calibrates `tau(SNR)` over the configured SNR grid.
///
/// Every trial runs AUD with the lowered calibration threshold so that
/// inactive UEs reach the potential list, estimates the list's gains and
/// records `F` with the known status. Frames carry no data payload.
pub fn calibrate_threshold(ctx: &SimContext, workers: Option<usize>) -> Result<ThresholdCurve> {
    let cfg = &ctx.config;
    if cfg.trials < MIN_CALIBRATION_TRIALS {
        return Err(Error::Config(format!(
            "calibration needs at least {MIN_CALIBRATION_TRIALS} trials per point, got {}",
            cfg.trials
        )));
    }
    let ctx = SimContext {
        config: SimConfig {
            payload_symbols: 0,
            ..cfg.clone()
        },
        ..ctx.clone()
    };
    let norm = cfg.raud.norm;
    let mut samples = Vec::with_capacity(cfg.snr_db.len());
    for &snr_db in &cfg.snr_db {
        let per_trial = par_trials(cfg.trials, workers, |t| {
            let (draw, _) = ctx.draw(snr_db, t)?;
            let list = ctx.detect(&draw).potential_list(cfg.raud.calibration_aud_threshold);
            let ce = ctx.estimate(&draw, &list)?;
            Ok(ce
                .h
                .iter()
                .zip(&ce.pilots)
                .map(|(h, &p)| (draw.scenario.is_active(p), f_value(h, norm)))
                .collect::<Vec<_>>())
        })?;
        let mut s = CalibrationSamples {
            snr_db,
            ..Default::default()
        };
        for (active, f) in per_trial.into_iter().flatten() {
            if active { s.active.push(f) } else { s.inactive.push(f) }
        }
        samples.push(s);
    }
    fit_threshold_curve(&samples, norm, cfg.raud.q, cfg.trials, cfg.seed)
}
