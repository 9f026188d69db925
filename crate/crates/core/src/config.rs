//! Simulation configuration. Defaults reproduce the 18-pilot / 6-active
//! setup with EPA fading.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ce::CeMethod;
use crate::channel::TdlProfile;
use crate::raud::NormKind;
use crate::{Error, Result};

/// Channel model selection, written `epa`, `eva`, `flat` or `custom:<file>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ChannelChoice {
    Epa,
    Eva,
    Flat,
    Custom(PathBuf),
}

impl ChannelChoice {
    pub fn profile(&self) -> Result<TdlProfile> {
        Ok(match self {
            ChannelChoice::Epa => TdlProfile::epa(),
            ChannelChoice::Eva => TdlProfile::eva(),
            ChannelChoice::Flat => TdlProfile::flat(),
            ChannelChoice::Custom(path) => TdlProfile::from_json_file(path)?,
        })
    }

    /// Short name used in output files.
    pub fn label(&self) -> String {
        match self {
            ChannelChoice::Epa => "epa".into(),
            ChannelChoice::Eva => "eva".into(),
            ChannelChoice::Flat => "flat".into(),
            ChannelChoice::Custom(path) => format!(
                "custom-{}",
                path.file_stem().and_then(|s| s.to_str()).unwrap_or("profile")
            ),
        }
    }
}

impl FromStr for ChannelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epa" => Ok(ChannelChoice::Epa),
            "eva" => Ok(ChannelChoice::Eva),
            "flat" => Ok(ChannelChoice::Flat),
            _ => match s.strip_prefix("custom:") {
                Some(path) if !path.is_empty() => Ok(ChannelChoice::Custom(path.into())),
                _ => Err(Error::Config(format!("unknown channel `{s}`"))),
            },
        }
    }
}

impl TryFrom<String> for ChannelChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ChannelChoice> for String {
    fn from(c: ChannelChoice) -> String {
        c.to_string()
    }
}

impl fmt::Display for ChannelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelChoice::Custom(path) => write!(f, "custom:{}", path.display()),
            other => f.write_str(&other.label()),
        }
    }
}

/// Power-delay profile assumed by the MMSE estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorChoice {
    /// The profile the channel is actually drawn from.
    Genie,
    Epa,
    Eva,
    Flat,
}

/// Where the decoder's data-resource gains come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataGain {
    /// True gains of the drawn realization.
    Genie,
    /// MMSE prediction from the pilot observation.
    Extrapolate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudConfig {
    /// `lambda_AUD` of the one-step receivers.
    pub threshold: f64,
    /// `lambda_AUD` of the two-step receiver.
    pub threshold_two_step: f64,
    pub p: f64,
    /// Fixed regularizer; unset means `sigma2 / Q`.
    pub lambda_reg: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for AudConfig {
    fn default() -> Self {
        AudConfig {
            threshold: 0.01,
            threshold_two_step: 0.007,
            p: 1.0,
            lambda_reg: None,
            max_iter: 30,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeConfig {
    pub method: CeMethod,
    pub prior: PriorChoice,
    pub data_gain: DataGain,
}

impl Default for CeConfig {
    fn default() -> Self {
        CeConfig {
            method: CeMethod::Mmse,
            prior: PriorChoice::Genie,
            data_gain: DataGain::Extrapolate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaudConfig {
    pub norm: NormKind,
    /// Fraction of active UEs the calibrated threshold may sacrifice.
    pub q: f64,
    /// `lambda_AUD` used while collecting calibration samples.
    pub calibration_aud_threshold: f64,
}

impl Default for RaudConfig {
    fn default() -> Self {
        RaudConfig {
            norm: NormKind::L2,
            q: 0.005,
            calibration_aud_threshold: 0.0035,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpaConfig {
    pub iters: usize,
    pub jmpa_theta: f64,
}

impl Default for MpaConfig {
    fn default() -> Self {
        MpaConfig {
            iters: 6,
            jmpa_theta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissedBits {
    /// A missed UE contributes all of its bits as errors.
    CountAsErrors,
    /// Missed UEs are left out of the BER.
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_active: usize,
    /// Codebook groups `J`.
    pub groups: usize,
    /// Pilots per group `L`.
    pub pilots_per_group: usize,
    pub rb_count: usize,
    /// Codebook JSON; unset uses the shipped default.
    pub codebook: Option<PathBuf>,
    pub channel: ChannelChoice,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Data symbols per active UE per frame.
    pub payload_symbols: usize,
    pub allow_collisions: bool,
    pub missed_bits: MissedBits,
    pub aud: AudConfig,
    pub ce: CeConfig,
    pub raud: RaudConfig,
    pub mpa: MpaConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_active: 6,
            groups: 6,
            pilots_per_group: 3,
            rb_count: 6,
            codebook: None,
            channel: ChannelChoice::Epa,
            snr_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            trials: 2000,
            seed: 1,
            payload_symbols: 1000,
            allow_collisions: false,
            missed_bits: MissedBits::CountAsErrors,
            aud: AudConfig::default(),
            ce: CeConfig::default(),
            raud: RaudConfig::default(),
            mpa: MpaConfig::default(),
        }
    }
}

impl SimConfig {
    /// Potential UEs, one per pilot.
    pub fn k_total(&self) -> usize {
        self.groups * self.pilots_per_group
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: SimConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_active > self.k_total() && !self.allow_collisions {
            return bad(format!(
                "{} active UEs exceed {} potential UEs",
                self.n_active,
                self.k_total()
            ));
        }
        if self.snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return bad("SNR grid must be strictly increasing".into());
        }
        if self.aud.threshold <= 0.0 || self.aud.threshold_two_step <= 0.0 {
            return bad("lambda_AUD must be positive".into());
        }
        if !(self.aud.p > 0.0 && self.aud.p <= 2.0) {
            return bad(format!("FOCUSS p={} outside (0, 2]", self.aud.p));
        }
        if self.aud.lambda_reg.is_some_and(|l| l < 0.0) {
            return bad("lambda_reg must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.raud.q) {
            return bad(format!("quantile q={} outside [0, 1)", self.raud.q));
        }
        if self.mpa.iters == 0 {
            return bad("MPA needs at least one iteration".into());
        }
        Ok(())
    }
}

/// Parses `a:step:b` (inclusive) or a single value.
pub fn parse_snr_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad SNR range `{s}`: {e}")))?;
    match parts.as_slice() {
        [x] => Ok(vec![*x]),
        [a, step, b] if *step > 0.0 && b >= a => {
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + step * i as f64).collect())
        }
        _ => Err(Error::Config(format!("bad SNR range `{s}`"))),
    }
}
