//! Tapped-delay-line block-fading channel.
//!
//! Each UE gets one realization per frame. Taps are independent zero-mean
//! circular complex Gaussians whose variances follow the power-delay profile,
//! and the per-tone gains are the DFT of the taps at the tone frequencies.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// OFDM subcarrier spacing.
pub const SUBCARRIER_SPACING_HZ: f64 = 15e3;

const EPA_JSON: &str = include_str!("../assets/epa.json");
const EVA_JSON: &str = include_str!("../assets/eva.json");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProfileKind {
    Epa,
    Eva,
    Flat,
    Custom(String),
}

impl ProfileKind {
    pub fn label(&self) -> &str {
        match self {
            ProfileKind::Epa => "epa",
            ProfileKind::Eva => "eva",
            ProfileKind::Flat => "flat",
            ProfileKind::Custom(name) => name,
        }
    }
}

/// On-disk profile format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileFile {
    pub name: String,
    pub delays_ns: Vec<f64>,
    pub powers_db: Vec<f64>,
}

/// Power-delay profile with linear tap powers normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TdlProfile {
    kind: ProfileKind,
    delays_ns: Vec<f64>,
    powers_db: Vec<f64>,
    powers: Vec<f64>,
}

impl TdlProfile {
    pub fn new(kind: ProfileKind, delays_ns: Vec<f64>, powers_db: Vec<f64>) -> Result<Self> {
        if delays_ns.is_empty() || delays_ns.len() != powers_db.len() {
            return Err(Error::Profile(format!(
                "{} delays vs {} powers",
                delays_ns.len(),
                powers_db.len()
            )));
        }
        if delays_ns.iter().chain(&powers_db).any(|x| !x.is_finite()) {
            return Err(Error::Profile("non-finite entry".into()));
        }
        if delays_ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Profile("delays must be strictly increasing".into()));
        }
        let lin: Vec<f64> = powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        let powers = lin.iter().map(|p| p / total).collect();
        Ok(TdlProfile {
            kind,
            delays_ns,
            powers_db,
            powers,
        })
    }

    pub fn epa() -> Self {
        Self::from_json_str(EPA_JSON).expect("shipped EPA profile")
    }

    pub fn eva() -> Self {
        Self::from_json_str(EVA_JSON).expect("shipped EVA profile")
    }

    pub fn flat() -> Self {
        Self::new(ProfileKind::Flat, vec![0.0], vec![0.0]).expect("flat profile")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ProfileFile = serde_json::from_str(text)?;
        let kind = match file.name.to_ascii_uppercase().as_str() {
            "EPA" => ProfileKind::Epa,
            "EVA" => ProfileKind::Eva,
            "FLAT" => ProfileKind::Flat,
            _ => ProfileKind::Custom(file.name.clone()),
        };
        Self::new(kind, file.delays_ns, file.powers_db)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self) -> ProfileFile {
        ProfileFile {
            name: self.kind.label().to_uppercase(),
            delays_ns: self.delays_ns.clone(),
            powers_db: self.powers_db.clone(),
        }
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn delays_ns(&self) -> &[f64] {
        &self.delays_ns
    }

    /// Normalized linear tap powers.
    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn taps(&self) -> usize {
        self.delays_ns.len()
    }
}

/// Tone frequencies of the pilot window and the data resources. Data
/// resources sit on the tones right after the pilot band.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneLayout {
    pub pilot_hz: Vec<f64>,
    pub data_hz: Vec<f64>,
}

impl ToneLayout {
    pub fn contiguous(pilot_tones: usize, data_tones: usize) -> Self {
        let f = |n: usize| n as f64 * SUBCARRIER_SPACING_HZ;
        ToneLayout {
            pilot_hz: (0..pilot_tones).map(f).collect(),
            data_hz: (pilot_tones..pilot_tones + data_tones).map(f).collect(),
        }
    }
}

/// One UE's channel over one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<C64>,
    /// Gains over the pilot tones.
    pub h_pilot: Vec<C64>,
    /// Gains over the data resources.
    pub h_data: Vec<C64>,
}

impl ChannelRealization {
    /// Realization with the same gain `g` on every tone.
    pub fn constant(g: C64, layout: &ToneLayout) -> Self {
        ChannelRealization {
            taps: vec![g],
            h_pilot: vec![g; layout.pilot_hz.len()],
            h_data: vec![g; layout.data_hz.len()],
        }
    }
}

/// Draws a `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_realization<R: Rng + ?Sized>(
    profile: &TdlProfile,
    layout: &ToneLayout,
    rng: &mut R,
) -> ChannelRealization {
    let taps: Vec<C64> = profile
        .powers()
        .iter()
        .map(|p| complex_normal(rng) * p.sqrt())
        .collect();
    let h_pilot = freq_response(&taps, profile.delays_ns(), &layout.pilot_hz);
    let h_data = freq_response(&taps, profile.delays_ns(), &layout.data_hz);
    ChannelRealization {
        taps,
        h_pilot,
        h_data,
    }
}

/// `H(f) = sum_l tap_l exp(-j 2 pi f tau_l)`.
pub fn freq_response(taps: &[C64], delays_ns: &[f64], tones_hz: &[f64]) -> Vec<C64> {
    assert_eq!(taps.len(), delays_ns.len(), "taps and delays differ in length");
    tones_hz
        .iter()
        .map(|&f| {
            taps.iter()
                .zip(delays_ns)
                .map(|(tap, &tau)| tap * C64::from_polar(1.0, -2.0 * PI * f * tau * 1e-9))
                .sum()
        })
        .collect()
}

/// Adds i.i.d. `CN(0, sigma2)` noise.
pub fn add_awgn<R: Rng + ?Sized>(x: &[C64], sigma2: f64, rng: &mut R) -> Result<Vec<C64>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::NegativeNoise(sigma2));
    }
    let sigma = sigma2.sqrt();
    Ok(x.iter().map(|&v| v + complex_normal(rng) * sigma).collect())
}
