//! Ground-truth transmit side: which UEs are active, what they send, and
//! what the receiver observes on the pilot window and the data resources.

use rand::seq::index::sample;
use rand::Rng;

use crate::channel::{add_awgn, sample_realization, ChannelRealization, TdlProfile, ToneLayout};
use crate::codec::{CodebookSet, CodewordStream};
use crate::pilots::PilotPool;
use crate::{Error, Result, C64};

/// One transmitting UE.
#[derive(Debug, Clone)]
pub struct ActiveUe {
    /// Pilot index in the pool (0-based).
    pub pilot: usize,
    /// Codebook group implied by the pilot (1-based).
    pub group: usize,
    pub channel: ChannelRealization,
    pub bits: Vec<u8>,
    pub stream: CodewordStream,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub k_total: usize,
    pub active: Vec<ActiveUe>,
    /// A realization for every pilot of the pool. Active UEs transmit through
    /// theirs; the others are only used for genie-aided data gains.
    pub pilot_channels: Vec<ChannelRealization>,
}

impl Scenario {
    /// Distinct pilots in use, ascending.
    pub fn true_pilots(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.active.iter().map(|u| u.pilot).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    pub fn is_active(&self, pilot: usize) -> bool {
        self.active.iter().any(|u| u.pilot == pilot)
    }

    pub fn payload_symbols(&self) -> usize {
        self.active.first().map_or(0, |u| u.stream.symbols.len())
    }
}

/// What the receiver sees for one frame.
#[derive(Debug, Clone)]
pub struct ReceivedFrame {
    pub y_pilot: Vec<C64>,
    /// One `T`-vector per data symbol.
    pub y_data: Vec<Vec<C64>>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ScenarioParams {
    pub n_active: usize,
    pub payload_symbols: usize,
    /// Let two active UEs pick the same pilot.
    pub allow_collisions: bool,
}

/// Draws active UEs, their channels and payloads.
pub fn draw_scenario<R: Rng + ?Sized>(
    params: &ScenarioParams,
    pool: &PilotPool,
    codebooks: &CodebookSet,
    profile: &TdlProfile,
    layout: &ToneLayout,
    rng: &mut R,
) -> Result<Scenario> {
    let k = pool.len();
    if params.n_active > k && !params.allow_collisions {
        return Err(Error::Config(format!(
            "{} active UEs cannot pick distinct pilots from {k}",
            params.n_active
        )));
    }
    let pilots: Vec<usize> = if params.allow_collisions {
        (0..params.n_active).map(|_| rng.random_range(0..k)).collect()
    } else {
        let mut p = sample(rng, k, params.n_active).into_vec();
        p.sort_unstable();
        p
    };
    let pilot_channels: Vec<ChannelRealization> =
        (0..k).map(|_| sample_realization(profile, layout, rng)).collect();

    let mut active = Vec::with_capacity(pilots.len());
    let mut used = vec![false; k];
    for &pilot in &pilots {
        let channel = if used[pilot] {
            sample_realization(profile, layout, rng)
        } else {
            used[pilot] = true;
            pilot_channels[pilot].clone()
        };
        let group = pool.group_of(pilot);
        let cb = codebooks.group(group);
        let bits: Vec<u8> = (0..params.payload_symbols * cb.bits_per_symbol())
            .map(|_| rng.random_range(0..2u8))
            .collect();
        let stream = cb.encode(&bits)?;
        active.push(ActiveUe {
            pilot,
            group,
            channel,
            bits,
            stream,
        });
    }
    Ok(Scenario {
        k_total: k,
        active,
        pilot_channels,
    })
}

/// `y = sum_p diag(H_p) s_p + n` over the pilot window.
pub fn synth_pilot_rx<R: Rng + ?Sized>(
    scenario: &Scenario,
    pool: &PilotPool,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<C64>> {
    let mut y = vec![C64::new(0.0, 0.0); pool.q()];
    for ue in &scenario.active {
        pool.check_index(ue.pilot)?;
        for ((acc, s), h) in y.iter_mut().zip(pool.sequence(ue.pilot)).zip(&ue.channel.h_pilot) {
            *acc += h * s;
        }
    }
    add_awgn(&y, sigma2, rng)
}

/// `y_t = sum_p diag(g_p) x_{p,t} + n_t` for every data symbol `t`.
pub fn synth_data_rx<R: Rng + ?Sized>(
    scenario: &Scenario,
    codebooks: &CodebookSet,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<Vec<C64>>> {
    let t_dim = codebooks.resources();
    let n_sym = scenario.payload_symbols();
    let mut out = Vec::with_capacity(n_sym);
    for t in 0..n_sym {
        let mut y = vec![C64::new(0.0, 0.0); t_dim];
        for ue in &scenario.active {
            let cw = codebooks.group(ue.group).codeword(ue.stream.symbols[t]);
            for ((acc, x), g) in y.iter_mut().zip(cw).zip(&ue.channel.h_data) {
                *acc += g * x;
            }
        }
        out.push(add_awgn(&y, sigma2, rng)?);
    }
    Ok(out)
}

/// Pilot window first, then the data symbols, sharing one noise stream.
pub fn synthesize<R: Rng + ?Sized>(
    scenario: &Scenario,
    pool: &PilotPool,
    codebooks: &CodebookSet,
    sigma2: f64,
    rng: &mut R,
) -> Result<ReceivedFrame> {
    let y_pilot = synth_pilot_rx(scenario, pool, sigma2, rng)?;
    let y_data = synth_data_rx(scenario, codebooks, sigma2, rng)?;
    Ok(ReceivedFrame {
        y_pilot,
        y_data,
        sigma2,
    })
}
