//! Link-level simulator for uplink grant-free SCMA.
//!
//! The crate builds the transmit side (SCMA codebooks, Zadoff-Chu pilot
//! pool, tapped-delay-line fading) and two receiver families:
//!
//! * one-step: compressive-sensing activity detection (FOCUSS) followed by
//!   channel estimation and MPA or JMPA decoding;
//! * two-step: the same detector with a looser threshold, MMSE channel
//!   estimation, and a refinement stage that drops candidates whose
//!   estimated per-subcarrier gain vector has a small norm.
//!
//! [`harness`] ties everything together into seeded Monte Carlo sweeps.

pub mod aud;
pub mod ce;
pub mod channel;
pub mod codec;
pub mod config;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod linalg;
pub mod mpa;
pub mod pilots;
pub mod raud;

pub use error::{Error, Result};

/// Complex baseband sample.
pub type C64 = num_complex::Complex64;
