use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("factor graph infeasible: C({t},{n}) = {available} < {j} codebooks")]
    InfeasibleGraph {
        t: usize,
        n: usize,
        j: usize,
        available: u128,
    },

    #[error("malformed codebook: {0}")]
    MalformedCodebook(String),

    #[error("codebook {group} codeword {index}: {reason}")]
    SparsityMismatch {
        group: usize,
        index: usize,
        reason: String,
    },

    #[error("codebook {group}: mean codeword energy {energy} is not 1")]
    EnergyNotNormalized { group: usize, energy: f64 },

    #[error("bit length {len} is not a multiple of {bits_per_symbol}")]
    BitLength { len: usize, bits_per_symbol: usize },

    #[error("Zadoff-Chu length {0} is not prime")]
    NotPrime(usize),

    #[error("Zadoff-Chu root {root} outside (0, {n_zc})")]
    RootOutOfRange { root: usize, n_zc: usize },

    #[error("invalid pilot pool: {0}")]
    PilotPool(String),

    #[error("pilot index {index} outside pool of {size}")]
    PilotIndex { index: usize, size: usize },

    #[error("invalid channel profile: {0}")]
    Profile(String),

    #[error("noise variance must be non-negative, got {0}")]
    NegativeNoise(f64),

    #[error("channel estimation system is singular")]
    SingularSystem,

    #[error("invalid threshold curve: {0}")]
    Curve(String),

    #[error("degenerate calibration at {snr_db} dB: {reason}")]
    DegenerateCalibration { snr_db: f64, reason: String },

    #[error("decoder: {0}")]
    Decoder(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty trial list")]
    NoTrials,

    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
