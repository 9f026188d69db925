//! Message passing detection on the SCMA factor graph.
//!
//! Resource nodes marginalize the Gaussian likelihood
//! `exp(-|y_i - sum_u g_u[i] x_u[i]|^2 / sigma2)` over the codeword
//! hypotheses of their incident UEs; UE nodes multiply the incoming
//! messages. Messages live in the probability domain and are renormalized
//! after every update. Flooding schedule.
//!
//! JMPA appends the all-zero codeword to every codebook, uses the averaged
//! zero-codeword posterior to drop idle UEs, then decodes the rest with
//! plain MPA.

use crate::codec::{index_to_bits, Codebook, FactorGraph};
use crate::{Error, Result, C64};

/// Upper bound on hypotheses enumerated at one resource node.
pub const MAX_RESOURCE_HYPOTHESES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Mpa,
    Jmpa,
}

/// One UE entering the decoder.
#[derive(Debug, Clone)]
pub struct DecoderUser<'a> {
    pub codebook: &'a Codebook,
    /// Gain per data resource (length `T`).
    pub gains: Vec<C64>,
}

#[derive(Debug, Clone)]
pub struct DecoderInput<'a> {
    /// Received data symbols, each a `T`-vector.
    pub y: &'a [Vec<C64>],
    pub users: Vec<DecoderUser<'a>>,
    pub sigma2: f64,
    pub n_iter: usize,
    pub mode: DecodeMode,
    /// JMPA keeps a UE when its mean nonzero-codeword posterior is at
    /// least this value.
    pub jmpa_theta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodeResult {
    /// Hard bits per input UE; empty for UEs JMPA dropped.
    pub bits: Vec<Vec<u8>>,
    /// Decided codeword index per symbol; empty for dropped UEs.
    pub symbols: Vec<Vec<usize>>,
    /// `posteriors[u][t]` is UE `u`'s codeword posterior at symbol `t`.
    pub posteriors: Vec<Vec<Vec<f64>>>,
    /// JMPA verdict per input UE (`true` = active).
    pub jmpa_status: Option<Vec<bool>>,
    /// JMPA frame-averaged zero-codeword posterior per input UE.
    pub zero_posterior: Option<Vec<f64>>,
    /// Hypotheses visited at resource nodes, summed over iterations and
    /// symbols.
    pub complexity_ops: u64,
}

pub fn decode(input: &DecoderInput<'_>) -> Result<DecodeResult> {
    match input.mode {
        DecodeMode::Mpa => mpa_decode(input),
        DecodeMode::Jmpa => jmpa_decode(input),
    }
}

pub fn mpa_decode(input: &DecoderInput<'_>) -> Result<DecodeResult> {
    if input.users.is_empty() {
        return Ok(DecodeResult::default());
    }
    let tables: Vec<Vec<Vec<C64>>> = input
        .users
        .iter()
        .map(|u| u.codebook.entries().to_vec())
        .collect();
    let (posteriors, ops) = run(input, &tables)?;
    let mut out = DecodeResult {
        complexity_ops: ops,
        ..Default::default()
    };
    for (u, post) in posteriors.into_iter().enumerate() {
        let bps = input.users[u].codebook.bits_per_symbol();
        let syms: Vec<usize> = post.iter().map(|p| argmax(p)).collect();
        out.bits.push(syms.iter().flat_map(|&m| index_to_bits(m, bps)).collect());
        out.symbols.push(syms);
        out.posteriors.push(post);
    }
    Ok(out)
}

pub fn jmpa_decode(input: &DecoderInput<'_>) -> Result<DecodeResult> {
    if input.users.is_empty() {
        return Ok(DecodeResult {
            jmpa_status: Some(Vec::new()),
            zero_posterior: Some(Vec::new()),
            ..Default::default()
        });
    }
    let tables: Vec<Vec<Vec<C64>>> = input
        .users
        .iter()
        .map(|u| {
            let mut t = u.codebook.entries().to_vec();
            t.push(vec![C64::new(0.0, 0.0); u.gains.len()]);
            t
        })
        .collect();
    let (step1, ops1) = run(input, &tables)?;
    let n_sym = input.y.len().max(1) as f64;
    let zero: Vec<f64> = step1
        .iter()
        .map(|post| post.iter().map(|p| p[p.len() - 1]).sum::<f64>() / n_sym)
        .collect();
    let status: Vec<bool> = zero.iter().map(|z| 1.0 - z >= input.jmpa_theta).collect();

    let kept: Vec<usize> = (0..input.users.len()).filter(|&u| status[u]).collect();
    let step2_input = DecoderInput {
        users: kept.iter().map(|&u| input.users[u].clone()).collect(),
        mode: DecodeMode::Mpa,
        ..input.clone()
    };
    let step2 = mpa_decode(&step2_input)?;

    let n = input.users.len();
    let mut out = DecodeResult {
        bits: vec![Vec::new(); n],
        symbols: vec![Vec::new(); n],
        posteriors: vec![Vec::new(); n],
        jmpa_status: Some(status),
        zero_posterior: Some(zero),
        complexity_ops: ops1 + step2.complexity_ops,
    };
    for ((&u, bits), (syms, post)) in kept
        .iter()
        .zip(step2.bits)
        .zip(step2.symbols.into_iter().zip(step2.posteriors))
    {
        out.bits[u] = bits;
        out.symbols[u] = syms;
        out.posteriors[u] = post;
    }
    Ok(out)
}

/// `n_iter * sum_i m_p^{d(i)}` over the resources used by `survivors`
/// (codebook columns, 0-based, repeats allowed).
pub fn complexity_count(graph: &FactorGraph, survivors: &[usize], m_p: u64, n_iter: u64) -> u128 {
    complexity_from_degrees(&graph.degrees_for(survivors), m_p, n_iter)
}

pub fn complexity_from_degrees(degrees: &[usize], m_p: u64, n_iter: u64) -> u128 {
    let per_iter: u128 = degrees
        .iter()
        .filter(|&&d| d > 0)
        .map(|&d| (m_p as u128).pow(d as u32))
        .sum();
    n_iter as u128 * per_iter
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (m, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = m;
        }
    }
    best
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

/// One resource node and the UEs incident on it.
struct ResourceNode {
    resource: usize,
    /// `(user, slot)` where `slot` indexes the user's support.
    edges: Vec<(usize, usize)>,
    /// Hypothesis count per edge; mixed radix, first edge fastest.
    radix: Vec<usize>,
    /// Noiseless superposition for every joint hypothesis.
    points: Vec<C64>,
}

/// Runs the message passing over all symbols; returns per-user per-symbol
/// posteriors and the hypothesis count.
fn run(input: &DecoderInput<'_>, tables: &[Vec<Vec<C64>>]) -> Result<(Vec<Vec<Vec<f64>>>, u64)> {
    if input.n_iter == 0 {
        return Err(Error::Decoder("N_iter must be at least 1".into()));
    }
    let t_dim = input.y.first().map_or(input.users[0].gains.len(), Vec::len);
    let supports: Vec<&[usize]> = input.users.iter().map(|u| u.codebook.support()).collect();
    for (u, user) in input.users.iter().enumerate() {
        if user.gains.len() != t_dim {
            return Err(Error::Decoder(format!(
                "user {u} has {} gains for {t_dim} resources",
                user.gains.len()
            )));
        }
    }

    let mut nodes = Vec::new();
    for i in 0..t_dim {
        let edges: Vec<(usize, usize)> = supports
            .iter()
            .enumerate()
            .filter_map(|(u, s)| s.iter().position(|&r| r == i).map(|slot| (u, slot)))
            .collect();
        if edges.is_empty() {
            continue;
        }
        let radix: Vec<usize> = edges.iter().map(|&(u, _)| tables[u].len()).collect();
        let combos = radix
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .filter(|&c| c <= MAX_RESOURCE_HYPOTHESES)
            .ok_or_else(|| {
                Error::Decoder(format!(
                    "resource {i} would enumerate more than {MAX_RESOURCE_HYPOTHESES} hypotheses"
                ))
            })?;
        let mut points = Vec::with_capacity(combos);
        let mut digits = vec![0usize; edges.len()];
        for _ in 0..combos {
            let mut acc = C64::new(0.0, 0.0);
            for (e, &(u, _)) in edges.iter().enumerate() {
                acc += input.users[u].gains[i] * tables[u][digits[e]][i];
            }
            points.push(acc);
            increment(&mut digits, &radix);
        }
        nodes.push(ResourceNode {
            resource: i,
            edges,
            radix,
            points,
        });
    }

    let n_users = input.users.len();
    let hyps: Vec<usize> = tables.iter().map(Vec::len).collect();
    let mut posteriors: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(input.y.len()); n_users];
    let mut ops: u64 = 0;

    let mut lik: Vec<Vec<f64>> = nodes.iter().map(|n| vec![0.0; n.points.len()]).collect();
    // user -> slot -> message
    let mut v2r: Vec<Vec<Vec<f64>>> = supports
        .iter()
        .enumerate()
        .map(|(u, s)| vec![vec![0.0; hyps[u]]; s.len()])
        .collect();
    let mut r2v = v2r.clone();
    let mut prefix = Vec::new();
    let mut digits = Vec::new();
    // per node, per edge extrinsic accumulators
    let mut acc: Vec<Vec<Vec<f64>>> = nodes
        .iter()
        .map(|n| n.radix.iter().map(|&r| vec![0.0; r]).collect())
        .collect();

    for y in input.y {
        for (node, l) in nodes.iter().zip(lik.iter_mut()) {
            likelihood(y[node.resource], &node.points, input.sigma2, l);
        }
        for (u, msgs) in v2r.iter_mut().enumerate() {
            for m in msgs.iter_mut() {
                m.iter_mut().for_each(|x| *x = 1.0 / hyps[u] as f64);
            }
        }
        for _ in 0..input.n_iter {
            for ((node, l), acc) in nodes.iter().zip(&lik).zip(acc.iter_mut()) {
                let d = node.edges.len();
                let incoming: Vec<&[f64]> = node.edges.iter().map(|&(u, slot)| v2r[u][slot].as_slice()).collect();
                acc.iter_mut().for_each(|a| a.iter_mut().for_each(|x| *x = 0.0));
                digits.clear();
                digits.resize(d, 0);
                prefix.resize(d + 1, 0.0);
                for &w in l.iter() {
                    if w != 0.0 {
                        prefix[0] = w;
                        for e in 0..d {
                            prefix[e + 1] = prefix[e] * incoming[e][digits[e]];
                        }
                        let mut suffix = 1.0;
                        for e in (0..d).rev() {
                            acc[e][digits[e]] += prefix[e] * suffix;
                            suffix *= incoming[e][digits[e]];
                        }
                    }
                    increment(&mut digits, &node.radix);
                }
                ops += node.points.len() as u64;
                for (&(u, slot), a) in node.edges.iter().zip(acc.iter()) {
                    let out = &mut r2v[u][slot];
                    out.copy_from_slice(a);
                    normalize(out);
                }
            }
            for u in 0..n_users {
                let slots = supports[u].len();
                for s in 0..slots {
                    let msg = &mut v2r[u][s];
                    msg.iter_mut().for_each(|x| *x = 1.0);
                    for other in (0..slots).filter(|&o| o != s) {
                        for (x, r) in msg.iter_mut().zip(&r2v[u][other]) {
                            *x *= r;
                        }
                    }
                    normalize(msg);
                }
            }
        }
        for u in 0..n_users {
            let mut post = vec![1.0; hyps[u]];
            for msg in &r2v[u] {
                for (x, r) in post.iter_mut().zip(msg) {
                    *x *= r;
                }
            }
            normalize(&mut post);
            posteriors[u].push(post);
        }
    }
    Ok((posteriors, ops))
}

fn increment(digits: &mut [usize], radix: &[usize]) {
    for (d, &r) in digits.iter_mut().zip(radix) {
        *d += 1;
        if *d < r {
            return;
        }
        *d = 0;
    }
}

/// Likelihood up to a common factor; with `sigma2 == 0` it collapses to
/// the indicator of the closest hypotheses.
fn likelihood(y: C64, points: &[C64], sigma2: f64, out: &mut [f64]) {
    let mut min = f64::INFINITY;
    for (o, p) in out.iter_mut().zip(points) {
        *o = (y - p).norm_sqr();
        min = min.min(*o);
    }
    if sigma2 > 0.0 {
        out.iter_mut().for_each(|d| *d = (-(*d - min) / sigma2).exp());
    } else {
        let tol = min * 1e-9 + 1e-24;
        out.iter_mut().for_each(|d| *d = if *d - min <= tol { 1.0 } else { 0.0 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{build_factor_graph, default_codebooks};

    fn unit() -> Vec<C64> {
        vec![C64::new(1.0, 0.0); 4]
    }

    #[test]
    fn single_user_noiseless() {
        let set = default_codebooks();
        let cb = set.group(3);
        let bits: Vec<u8> = vec![0, 1, 1, 1, 1, 0, 0, 0, 1, 1];
        let stream = cb.encode(&bits).unwrap();
        let y: Vec<Vec<C64>> = cb.modulate(&stream).map(|x| x.to_vec()).collect();
        let input = DecoderInput {
            y: &y,
            users: vec![DecoderUser { codebook: cb, gains: unit() }],
            sigma2: 0.0,
            n_iter: 3,
            mode: DecodeMode::Mpa,
            jmpa_theta: 0.5,
        };
        let out = mpa_decode(&input).unwrap();
        assert_eq!(out.bits[0], bits);
    }

    #[test]
    fn empty_survivors() {
        let y = vec![vec![C64::new(0.0, 0.0); 4]];
        let input = DecoderInput {
            y: &y,
            users: vec![],
            sigma2: 1.0,
            n_iter: 3,
            mode: DecodeMode::Mpa,
            jmpa_theta: 0.5,
        };
        assert!(mpa_decode(&input).unwrap().bits.is_empty());
    }

    #[test]
    fn complexity_worked_value() {
        let g = build_factor_graph(4, 6, 2).unwrap();
        assert_eq!(complexity_count(&g, &[0, 1, 2, 3, 4, 5], 4, 5), 1280);
        assert_eq!(complexity_count(&g, &[], 4, 5), 0);
        let mut prev = 0;
        let mut surv = Vec::new();
        for j in [0, 3, 5, 1, 1, 2] {
            surv.push(j);
            let c = complexity_count(&g, &surv, 4, 6);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn jmpa_flags_silent_user() {
        let set = default_codebooks();
        let (a, b) = (set.group(1), set.group(6));
        let bits = vec![1, 0, 0, 1, 1, 1];
        let stream = a.encode(&bits).unwrap();
        let y: Vec<Vec<C64>> = a.modulate(&stream).map(|x| x.to_vec()).collect();
        let input = DecoderInput {
            y: &y,
            users: vec![
                DecoderUser { codebook: a, gains: unit() },
                DecoderUser { codebook: b, gains: unit() },
            ],
            sigma2: 0.0,
            n_iter: 4,
            mode: DecodeMode::Jmpa,
            jmpa_theta: 0.5,
        };
        let out = jmpa_decode(&input).unwrap();
        let zero = out.zero_posterior.as_ref().unwrap();
        assert!(zero[0] < 1e-12, "{}", zero[0]);
        assert!((zero[1] - 1.0).abs() < 1e-12, "{}", zero[1]);
        assert_eq!(out.jmpa_status, Some(vec![true, false]));
        assert_eq!(out.bits[0], bits);
        assert!(out.bits[1].is_empty());
    }
}
