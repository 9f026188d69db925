//! Monte Carlo driver.
//!
//! Trial `t` draws everything from its own ChaCha stream `(seed, t)`, so
//! adding trials or changing the worker count never changes an earlier
//! trial. Noise is drawn at unit variance and scaled, so every SNR point
//! (and every channel model) sees the same UEs, pilots and bits. All
//! receiver chains of one sweep run on the same frames.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aud::{ActivityDetector, ActivityEstimate, FocussParams, SparseRecovery};
use crate::ce::{ChannelEstimator, ChannelGainEstimate};
use crate::channel::{TdlProfile, ToneLayout};
use crate::codec::{build_factor_graph, default_codebooks, load_codebook, CodebookSet};
use crate::config::{DataGain, MissedBits, PriorChoice, SimConfig};
use crate::frontend::{draw_scenario, synthesize, ReceivedFrame, Scenario, ScenarioParams};
use crate::mpa::{complexity_count, decode, DecodeMode, DecoderInput, DecoderUser};
use crate::pilots::{build_pilot_pool, PilotPool};
use crate::raud::{f_value, raud_filter, ThresholdCurve};
use crate::{Error, Result, C64};

/// Histogram resolution of [`experiment_histograms`].
pub const HISTOGRAM_BINS: usize = 64;

/// Noise variance for unit-power UEs at `snr_db`.
pub fn snr_to_sigma2(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Random stream of trial `t`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Everything a trial needs that does not change between trials.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub config: SimConfig,
    pub pool: PilotPool,
    pub codebooks: CodebookSet,
    pub profile: TdlProfile,
    pub layout: ToneLayout,
    pub detector: ActivityDetector,
    pub estimator: ChannelEstimator,
}

/// One synthesized frame with its ground truth.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub scenario: Scenario,
    pub frame: ReceivedFrame,
    pub snr_db: f64,
}

impl SimContext {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let pool = build_pilot_pool(config.groups, config.pilots_per_group, config.rb_count)?;
        let codebooks = match &config.codebook {
            Some(path) => load_codebook(path, &build_factor_graph(4, config.groups, 2)?)?,
            None => default_codebooks(),
        };
        if codebooks.codebooks().len() != config.groups {
            return Err(Error::Config(format!(
                "{} codebooks for {} pilot groups",
                codebooks.codebooks().len(),
                config.groups
            )));
        }
        let profile = config.channel.profile()?;
        let layout = ToneLayout::contiguous(pool.q(), codebooks.resources());
        let prior = match config.ce.prior {
            PriorChoice::Genie => profile.clone(),
            PriorChoice::Epa => TdlProfile::epa(),
            PriorChoice::Eva => TdlProfile::eva(),
            PriorChoice::Flat => TdlProfile::flat(),
        };
        let recovery = SparseRecovery::Focuss(FocussParams {
            p: config.aud.p,
            lambda_reg: 0.0,
            max_iter: config.aud.max_iter,
            tol: config.aud.tol,
        });
        Ok(SimContext {
            detector: ActivityDetector::new(&pool, recovery, config.aud.lambda_reg),
            estimator: ChannelEstimator::new(config.ce.method, &prior, &layout.pilot_hz, &layout.data_hz),
            config,
            pool,
            codebooks,
            profile,
            layout,
        })
    }

    /// Draws trial `t` at `snr_db`; the returned stream can keep drawing
    /// trial-specific randomness.
    pub fn draw(&self, snr_db: f64, trial: u64) -> Result<(TrialDraw, ChaCha8Rng)> {
        let mut rng = trial_rng(self.config.seed, trial);
        let params = ScenarioParams {
            n_active: self.config.n_active,
            payload_symbols: self.config.payload_symbols,
            allow_collisions: self.config.allow_collisions,
        };
        let scenario = draw_scenario(&params, &self.pool, &self.codebooks, &self.profile, &self.layout, &mut rng)?;
        let frame = synthesize(&scenario, &self.pool, &self.codebooks, snr_to_sigma2(snr_db), &mut rng)?;
        Ok((
            TrialDraw {
                scenario,
                frame,
                snr_db,
            },
            rng,
        ))
    }

    pub fn detect(&self, draw: &TrialDraw) -> ActivityEstimate {
        self.detector.detect(&draw.frame.y_pilot, draw.frame.sigma2)
    }

    pub fn estimate(&self, draw: &TrialDraw, list: &[usize]) -> Result<ChannelGainEstimate> {
        self.estimator.estimate(&draw.frame.y_pilot, &self.pool, list, draw.frame.sigma2)
    }

    /// Per-symbol operation count of MPA over `pilots` with `m` hypotheses
    /// per UE.
    pub fn complexity(&self, pilots: &[usize], m: u64) -> u128 {
        let cols: Vec<usize> = pilots.iter().map(|&p| self.pool.group_of(p) - 1).collect();
        complexity_count(self.codebooks.graph(), &cols, m, self.config.mpa.iters as u64)
    }

    fn data_gains(&self, draw: &TrialDraw, ce: &ChannelGainEstimate, pos: usize) -> Vec<C64> {
        match self.config.ce.data_gain {
            DataGain::Genie => draw.scenario.pilot_channels[ce.pilots[pos]].h_data.clone(),
            DataGain::Extrapolate => ce.g[pos].clone(),
        }
    }

    /// Decodes the UEs at `positions` of `ce`. Returns the positions that
    /// survive decoding (all of them for MPA) and their hard bits. Frames
    /// without payload skip the decoder.
    fn decode_positions(
        &self,
        draw: &TrialDraw,
        ce: &ChannelGainEstimate,
        positions: &[usize],
        mode: DecodeMode,
    ) -> Result<(Vec<usize>, Vec<Vec<u8>>)> {
        if draw.frame.y_data.is_empty() {
            return Ok((positions.to_vec(), vec![Vec::new(); positions.len()]));
        }
        let users = positions
            .iter()
            .map(|&i| DecoderUser {
                codebook: self.codebooks.group(self.pool.group_of(ce.pilots[i])),
                gains: self.data_gains(draw, ce, i),
            })
            .collect();
        let input = DecoderInput {
            y: &draw.frame.y_data,
            users,
            sigma2: draw.frame.sigma2,
            n_iter: self.config.mpa.iters,
            mode,
            jmpa_theta: self.config.mpa.jmpa_theta,
        };
        let res = decode(&input)?;
        match res.jmpa_status {
            None => Ok((positions.to_vec(), res.bits)),
            Some(status) => {
                let mut kept = Vec::new();
                let mut bits = Vec::new();
                for ((&pos, keep), b) in positions.iter().zip(status).zip(res.bits) {
                    if keep {
                        kept.push(pos);
                        bits.push(b);
                    }
                }
                Ok((kept, bits))
            }
        }
    }

    /// Compares detection and decoding against the ground truth.
    fn score(
        &self,
        draw: &TrialDraw,
        aud_list: &[usize],
        detected: &[usize],
        bits: &[Vec<u8>],
        complexity_ops: u128,
    ) -> TrialMetrics {
        let scenario = &draw.scenario;
        let mut m = TrialMetrics {
            k_total: scenario.k_total,
            n_active: scenario.active.len(),
            true_active: scenario.true_pilots(),
            missed_aud: scenario.active.iter().filter(|u| !aud_list.contains(&u.pilot)).count(),
            false_aud: aud_list.iter().filter(|&&p| !scenario.is_active(p)).count(),
            missed: scenario.active.iter().filter(|u| !detected.contains(&u.pilot)).count(),
            false_alarms: detected.iter().filter(|&&p| !scenario.is_active(p)).count(),
            detected_aud: aud_list.to_vec(),
            detected: detected.to_vec(),
            complexity_ops,
            ..Default::default()
        };
        for ue in &scenario.active {
            match detected.iter().position(|&p| p == ue.pilot) {
                Some(i) => {
                    m.bits += ue.bits.len() as u64;
                    m.bit_errors += ue.bits.iter().zip(&bits[i]).filter(|(a, b)| a != b).count() as u64;
                }
                None if self.config.missed_bits == MissedBits::CountAsErrors => {
                    m.bits += ue.bits.len() as u64;
                    m.bit_errors += ue.bits.len() as u64;
                }
                None => {}
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainKind {
    /// AUD, CE, MPA on the whole potential list.
    OneStepMpa,
    /// AUD, CE, JMPA deciding activity from the data.
    OneStepJmpa,
    /// AUD, CE, RAUD filter, MPA on the refined list.
    TwoStep,
}

impl ChainKind {
    pub const ALL: [ChainKind; 3] = [ChainKind::OneStepMpa, ChainKind::OneStepJmpa, ChainKind::TwoStep];

    pub fn as_str(self) -> &'static str {
        match self {
            ChainKind::OneStepMpa => "one-step-mpa",
            ChainKind::OneStepJmpa => "one-step-jmpa",
            ChainKind::TwoStep => "two-step",
        }
    }
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChainKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown chain `{s}`")))
    }
}

/// A receiver: chain type, its AUD threshold and, for two-step, the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverChain {
    pub kind: ChainKind,
    pub label: String,
    pub aud_threshold: f64,
    pub curve: Option<ThresholdCurve>,
}

impl ReceiverChain {
    /// Chain with the thresholds of `config`. Two-step chains need a curve.
    pub fn from_config(kind: ChainKind, config: &SimConfig, curve: Option<ThresholdCurve>) -> Result<Self> {
        let aud_threshold = match kind {
            ChainKind::TwoStep => config.aud.threshold_two_step,
            _ => config.aud.threshold,
        };
        if kind == ChainKind::TwoStep {
            match &curve {
                None => return Err(Error::Config("two-step chain needs a threshold curve".into())),
                Some(c) => c.validate()?,
            }
        }
        Ok(ReceiverChain {
            kind,
            label: kind.as_str().to_string(),
            aud_threshold,
            curve: if kind == ChainKind::TwoStep { curve } else { None },
        })
    }
}

/// Outcome of one receiver chain on one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialMetrics {
    pub k_total: usize,
    /// Active UEs transmitting in the frame.
    pub n_active: usize,
    /// Distinct pilots in use.
    pub true_active: Vec<usize>,
    /// Potential list after the AUD stage.
    pub detected_aud: Vec<usize>,
    /// Final active list of the chain.
    pub detected: Vec<usize>,
    pub missed_aud: usize,
    pub false_aud: usize,
    pub missed: usize,
    pub false_alarms: usize,
    pub bit_errors: u64,
    pub bits: u64,
    /// Per-symbol decoder operations.
    pub complexity_ops: u128,
}

impl TrialMetrics {
    /// Pilots not used by any active UE.
    pub fn n_inactive(&self) -> usize {
        self.k_total - self.true_active.len()
    }
}

/// A pooled proportion with its 95% Wilson half-width.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Proportion {
    pub successes: u64,
    pub total: u64,
    pub value: f64,
    pub ci: f64,
}

/// 95% Wilson score interval. The reported value is the raw proportion and
/// `ci` is the half-width of the interval around its centre. Empty totals
/// give zero for both.
pub fn wilson(successes: u64, total: u64) -> Proportion {
    if total == 0 {
        return Proportion::default();
    }
    const Z: f64 = 1.959963984540054;
    let n = total as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let ci = Z / denom * (p * (1.0 - p) / n + Z * Z / (4.0 * n * n)).sqrt();
    Proportion {
        successes,
        total,
        value: p,
        ci,
    }
}

impl Proportion {
    /// Lower and upper ends of the Wilson interval.
    pub fn bounds(&self) -> (f64, f64) {
        if self.total == 0 {
            return (0.0, 0.0);
        }
        const Z: f64 = 1.959963984540054;
        let n = self.total as f64;
        let centre = (self.value + Z * Z / (2.0 * n)) / (1.0 + Z * Z / n);
        (centre - self.ci, centre + self.ci)
    }
}

/// Pooled statistics of one chain at one SNR.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregate {
    pub trials: u64,
    pub p_md: Proportion,
    pub p_fa: Proportion,
    /// Miss and false-alarm rates of the AUD stage alone.
    pub p_md_aud: Proportion,
    pub p_fa_aud: Proportion,
    pub ber: Proportion,
    pub mean_complexity_ops: f64,
}

/// Pools a list of trials: ratios of summed counts to summed denominators.
pub fn compute_metrics(trials: &[TrialMetrics]) -> Result<Aggregate> {
    if trials.is_empty() {
        return Err(Error::NoTrials);
    }
    let sum = |f: &dyn Fn(&TrialMetrics) -> u64| trials.iter().map(f).sum::<u64>();
    let actives = sum(&|t| t.n_active as u64);
    let inactives = sum(&|t| t.n_inactive() as u64);
    let ops: f64 = trials.iter().map(|t| t.complexity_ops as f64).sum();
    Ok(Aggregate {
        trials: trials.len() as u64,
        p_md: wilson(sum(&|t| t.missed as u64), actives),
        p_fa: wilson(sum(&|t| t.false_alarms as u64), inactives),
        p_md_aud: wilson(sum(&|t| t.missed_aud as u64), actives),
        p_fa_aud: wilson(sum(&|t| t.false_aud as u64), inactives),
        ber: wilson(sum(&|t| t.bit_errors), sum(&|t| t.bits)),
        mean_complexity_ops: ops / trials.len() as f64,
    })
}

/// Runs every chain on trial `t` at `snr_db`; the chains share the frame
/// and the AUD output.
pub fn run_trial(ctx: &SimContext, chains: &[ReceiverChain], snr_db: f64, trial: u64) -> Result<Vec<TrialMetrics>> {
    let (draw, _) = ctx.draw(snr_db, trial)?;
    run_chains(ctx, chains, &draw)
}

pub fn run_chains(ctx: &SimContext, chains: &[ReceiverChain], draw: &TrialDraw) -> Result<Vec<TrialMetrics>> {
    let est = ctx.detect(draw);
    let mut ce_cache: Vec<ChannelGainEstimate> = Vec::new();
    let m = ctx.codebooks.m() as u64;
    let mut out = Vec::with_capacity(chains.len());
    for chain in chains {
        let list = est.potential_list(chain.aud_threshold);
        let ce = match ce_cache.iter().position(|c| c.pilots == list) {
            Some(i) => &ce_cache[i],
            None => {
                ce_cache.push(ctx.estimate(draw, &list)?);
                ce_cache.last().unwrap()
            }
        };
        let all: Vec<usize> = (0..list.len()).collect();
        let (kept, bits, ops) = match chain.kind {
            ChainKind::OneStepMpa => {
                let (kept, bits) = ctx.decode_positions(draw, ce, &all, DecodeMode::Mpa)?;
                (kept, bits, ctx.complexity(&list, m))
            }
            ChainKind::OneStepJmpa => {
                let (kept, bits) = ctx.decode_positions(draw, ce, &all, DecodeMode::Jmpa)?;
                let survivors: Vec<usize> = kept.iter().map(|&i| list[i]).collect();
                let ops = ctx.complexity(&list, m + 1) + ctx.complexity(&survivors, m);
                (kept, bits, ops)
            }
            ChainKind::TwoStep => {
                let curve = chain
                    .curve
                    .as_ref()
                    .ok_or_else(|| Error::Config("two-step chain needs a threshold curve".into()))?;
                let refined = raud_filter(ce, curve, draw.snr_db);
                let (kept, bits) = ctx.decode_positions(draw, ce, &refined.positions, DecodeMode::Mpa)?;
                (kept, bits, ctx.complexity(&refined.active_indices, m))
            }
        };
        let detected: Vec<usize> = kept.iter().map(|&i| list[i]).collect();
        out.push(ctx.score(draw, &list, &detected, &bits, ops));
    }
    Ok(out)
}

/// Maps `f` over trials `0..n` on `workers` threads (all cores when
/// `None`), keeping trial order.
pub fn par_trials<T, F>(n: u64, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|t| {
                f(t).map_err(|e| Error::Trial {
                    trial: t,
                    source: Box::new(e),
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub metrics: Aggregate,
}

/// One chain over the SNR grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub chain: String,
    pub channel: String,
    pub points: Vec<SweepPoint>,
}

pub const SWEEP_CSV_HEADER: &str =
    "chain,channel,snr_db,trials,p_md,p_md_ci,p_fa,p_fa_ci,ber,ber_ci,mean_complexity_ops";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            let m = &p.metrics;
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                self.chain,
                self.channel,
                p.snr_db,
                m.trials,
                m.p_md.value,
                m.p_md.ci,
                m.p_fa.value,
                m.p_fa.ci,
                m.ber.value,
                m.ber.ci,
                m.mean_complexity_ops
            ));
        }
        s
    }
}

/// Runs all chains over the configured SNR grid and trial count.
pub fn run_sweep(ctx: &SimContext, chains: &[ReceiverChain], workers: Option<usize>) -> Result<Vec<SweepResult>> {
    let mut results: Vec<SweepResult> = chains
        .iter()
        .map(|c| SweepResult {
            chain: c.label.clone(),
            channel: ctx.config.channel.label(),
            points: Vec::new(),
        })
        .collect();
    for &snr_db in &ctx.config.snr_db {
        let per_trial = par_trials(ctx.config.trials, workers, |t| run_trial(ctx, chains, snr_db, t))?;
        for (c, result) in results.iter_mut().enumerate() {
            let trials: Vec<TrialMetrics> = per_trial.iter().map(|v| v[c].clone()).collect();
            result.points.push(SweepPoint {
                snr_db,
                metrics: compute_metrics(&trials)?,
            });
        }
    }
    Ok(results)
}

/// Writes `text` to `path`, mapping I/O errors.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One row of the false-alarm injection table.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionRow {
    pub snr_db: f64,
    pub n_injected: usize,
    pub trials: u64,
    pub ber: Proportion,
    pub mean_complexity_ops: f64,
}

pub const INJECTION_CSV_HEADER: &str = "channel,snr_db,n_injected,trials,ber,ber_ci,mean_complexity_ops";

pub fn injection_csv(channel: &str, rows: &[InjectionRow]) -> String {
    let mut s = String::from(INJECTION_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{channel},{},{},{},{},{},{}\n",
            r.snr_db, r.n_injected, r.trials, r.ber.value, r.ber.ci, r.mean_complexity_ops
        ));
    }
    s
}

/// Decodes the true actives plus `n` inactive UEs forced into the list.
///
/// Detection is genie-aided; the injected pilots are a random draw from
/// the unused ones, and for every `n` the first `n` of the same draw are
/// used. Channel gains follow the configured data-gain policy.
pub fn experiment_false_alarm_injection(
    ctx: &SimContext,
    n_injected: &[usize],
    workers: Option<usize>,
) -> Result<Vec<InjectionRow>> {
    let n_max = n_injected.iter().copied().max().unwrap_or(0);
    let free = ctx.pool.len().saturating_sub(ctx.config.n_active);
    if n_max > free {
        return Err(Error::Config(format!("cannot inject {n_max} of {free} inactive UEs")));
    }
    let m = ctx.codebooks.m() as u64;
    let mut rows = Vec::new();
    for &snr_db in &ctx.config.snr_db {
        let per_trial = par_trials(ctx.config.trials, workers, |t| {
            let (draw, mut rng) = ctx.draw(snr_db, t)?;
            let truth = draw.scenario.true_pilots();
            let unused: Vec<usize> = (0..ctx.pool.len()).filter(|p| !truth.contains(p)).collect();
            if n_max > unused.len() {
                return Err(Error::Config(format!(
                    "cannot inject {n_max} of {} inactive UEs",
                    unused.len()
                )));
            }
            let order: Vec<usize> = sample(&mut rng, unused.len(), n_max).into_iter().map(|i| unused[i]).collect();
            n_injected
                .iter()
                .map(|&n| {
                    let mut list = truth.clone();
                    list.extend_from_slice(&order[..n]);
                    list.sort_unstable();
                    let ce = ctx.estimate(&draw, &list)?;
                    let all: Vec<usize> = (0..list.len()).collect();
                    let (kept, bits) = ctx.decode_positions(&draw, &ce, &all, DecodeMode::Mpa)?;
                    let detected: Vec<usize> = kept.iter().map(|&i| list[i]).collect();
                    Ok(ctx.score(&draw, &truth, &detected, &bits, ctx.complexity(&list, m)))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (i, &n) in n_injected.iter().enumerate() {
            let trials: Vec<TrialMetrics> = per_trial.iter().map(|v| v[i].clone()).collect();
            let agg = compute_metrics(&trials)?;
            rows.push(InjectionRow {
                snr_db,
                n_injected: n,
                trials: agg.trials,
                ber: agg.ber,
                mean_complexity_ops: agg.mean_complexity_ops,
            });
        }
    }
    Ok(rows)
}

/// Bin masses of `values` over `[0, 1]`, summing to one (all zero for no
/// values). Values at or above 1 land in the last bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    if values.is_empty() {
        return h;
    }
    for &v in values {
        let b = ((v.max(0.0) * bins as f64) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    let n = values.len() as f64;
    h.iter_mut().for_each(|x| *x /= n);
    h
}

/// Sum of bin-wise minima of two normalized histograms.
pub fn overlap_coefficient(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum()
}

/// Characteristic-value histograms of one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSet {
    pub receiver: String,
    pub channel: String,
    pub snr_db: f64,
    pub active: Vec<f64>,
    pub inactive: Vec<f64>,
    pub overlap: f64,
}

impl HistogramSet {
    /// Max-normalizes both samples jointly and bins them.
    pub fn from_samples(receiver: &str, channel: &str, snr_db: f64, active: &[f64], inactive: &[f64]) -> Self {
        let max = active.iter().chain(inactive).copied().fold(0.0, f64::max);
        let scale = if max > 0.0 { max.recip() } else { 0.0 };
        let norm = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x * scale).collect() };
        let a = histogram(&norm(active), HISTOGRAM_BINS);
        let i = histogram(&norm(inactive), HISTOGRAM_BINS);
        HistogramSet {
            receiver: receiver.into(),
            channel: channel.into(),
            snr_db,
            overlap: overlap_coefficient(&a, &i),
            active: a,
            inactive: i,
        }
    }
}

pub const HISTOGRAM_CSV_HEADER: &str = "receiver,channel,snr_db,status,bin,lo,hi,mass";
pub const OVERLAP_CSV_HEADER: &str = "receiver,channel,snr_db,overlap";

pub fn histogram_csv(sets: &[HistogramSet]) -> String {
    let mut s = String::from(HISTOGRAM_CSV_HEADER);
    s.push('\n');
    for set in sets {
        for (status, h) in [("active", &set.active), ("inactive", &set.inactive)] {
            let n = h.len() as f64;
            for (b, mass) in h.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{status},{b},{},{},{mass}\n",
                    set.receiver,
                    set.channel,
                    set.snr_db,
                    b as f64 / n,
                    (b + 1) as f64 / n
                ));
            }
        }
    }
    s
}

pub fn overlap_csv(sets: &[HistogramSet]) -> String {
    let mut s = String::from(OVERLAP_CSV_HEADER);
    s.push('\n');
    for set in sets {
        s.push_str(&format!("{},{},{},{}\n", set.receiver, set.channel, set.snr_db, set.overlap));
    }
    s
}

/// Known-status characteristic values of both receivers at every SNR.
///
/// The one-step receiver's value is the AUD output `|h_k|^2` of every
/// pilot. The two-step receiver's value is `F` of the estimated gain vector
/// for pilots in its potential list and 0 for pilots the AUD stage already
/// rejected.
pub fn experiment_histograms(ctx: &SimContext, workers: Option<usize>) -> Result<Vec<HistogramSet>> {
    let channel = ctx.config.channel.label();
    let norm = ctx.config.raud.norm;
    let mut sets = Vec::new();
    for &snr_db in &ctx.config.snr_db {
        let per_trial = par_trials(ctx.config.trials, workers, |t| {
            let (draw, _) = ctx.draw(snr_db, t)?;
            let est = ctx.detect(&draw);
            let list = est.potential_list(ctx.config.aud.threshold_two_step);
            let ce = ctx.estimate(&draw, &list)?;
            let mut f = vec![0.0; ctx.pool.len()];
            for (h, &p) in ce.h.iter().zip(&ce.pilots) {
                f[p] = f_value(h, norm);
            }
            let status: Vec<bool> = (0..ctx.pool.len()).map(|p| draw.scenario.is_active(p)).collect();
            Ok((est.char_values, f, status))
        })?;
        for (receiver, pick) in [("one-step", 0usize), ("two-step", 1)] {
            let (mut active, mut inactive) = (Vec::new(), Vec::new());
            for (chars, f, status) in &per_trial {
                let values = if pick == 0 { chars } else { f };
                for (&v, &s) in values.iter().zip(status) {
                    if s { active.push(v) } else { inactive.push(v) }
                }
            }
            sets.push(HistogramSet::from_samples(receiver, &channel, snr_db, &active, &inactive));
        }
    }
    Ok(sets)
}
