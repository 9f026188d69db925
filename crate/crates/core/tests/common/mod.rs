//! Independent reference computations shared by the integration and
//! acceptance tests.

#![allow(dead_code)]

use gfscma::aud::{focuss, FocussParams};
use gfscma::channel::{complex_normal, sample_realization, TdlProfile, ToneLayout};
use gfscma::codec::CodebookSet;
use gfscma::mpa::{mpa_decode, DecodeMode, DecoderInput, DecoderUser};
use gfscma::C64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian matrix with unit-norm columns.
pub fn unit_column_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    let mut s = DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng));
    for mut col in s.column_iter_mut() {
        let n = col.norm();
        col /= C64::new(n, 0.0);
    }
    s
}

/// Residual of the least-squares fit of `y` on two columns, from the 2x2
/// normal equations solved by Cramer's rule.
fn pair_residual(s: &DMatrix<C64>, y: &[C64], i: usize, j: usize) -> f64 {
    let dot = |a: usize, b: usize| -> C64 { (0..s.nrows()).map(|n| s[(n, a)].conj() * s[(n, b)]).sum() };
    let proj = |a: usize| -> C64 { (0..s.nrows()).map(|n| s[(n, a)].conj() * y[n]).sum() };
    let (gii, gij, gji, gjj) = (dot(i, i), dot(i, j), dot(j, i), dot(j, j));
    let (bi, bj) = (proj(i), proj(j));
    let det = gii * gjj - gij * gji;
    let xi = (bi * gjj - gij * bj) / det;
    let xj = (gii * bj - gji * bi) / det;
    (0..s.nrows())
        .map(|n| (y[n] - s[(n, i)] * xi - s[(n, j)] * xj).norm_sqr())
        .sum()
}

/// Best 2-support by exhaustive least squares.
pub fn exhaustive_pair(s: &DMatrix<C64>, y: &[C64]) -> (usize, usize) {
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..s.ncols() {
        for j in i + 1..s.ncols() {
            let r = pair_residual(s, y, i, j);
            if r < best.2 {
                best = (i, j, r);
            }
        }
    }
    (best.0, best.1)
}

fn top_two(h: &[C64]) -> (usize, usize) {
    let mut idx: Vec<usize> = (0..h.len()).collect();
    idx.sort_by(|&a, &b| h[b].norm().total_cmp(&h[a].norm()));
    (idx[0].min(idx[1]), idx[0].max(idx[1]))
}

/// Noiseless 2-sparse instances where FOCUSS's two largest entries match
/// the exhaustive oracle. Returns `(hits, instances)`.
pub fn focuss_oracle_agreement(instances: usize, q: usize, k: usize, seed: u64) -> (usize, usize) {
    let mut r = rng(seed);
    let params = FocussParams {
        lambda_reg: 1e-10,
        ..Default::default()
    };
    let mut hits = 0;
    for _ in 0..instances {
        let s = unit_column_matrix(&mut r, q, k);
        let a = r.random_range(0..k);
        let b = (a + r.random_range(1..k)) % k;
        let mut h = vec![C64::new(0.0, 0.0); k];
        h[a] = complex_normal(&mut r);
        h[b] = complex_normal(&mut r);
        let y: Vec<C64> = (0..q).map(|n| s[(n, a)] * h[a] + s[(n, b)] * h[b]).collect();
        let out = focuss(&s, &y, &params);
        if top_two(&out.h) == exhaustive_pair(&s, &y) {
            hits += 1;
        }
    }
    (hits, instances)
}

/// Per-user codeword marginals of one symbol by enumerating all joint
/// hypotheses.
pub fn brute_force_marginals(y: &[C64], gains: &[Vec<C64>], cbs: &CodebookSet, sigma2: f64) -> Vec<Vec<f64>> {
    let j = gains.len();
    let m = cbs.m();
    let total = m.pow(j as u32);
    let mut marg = vec![vec![0.0; m]; j];
    for hyp in 0..total {
        let mut idx = vec![0; j];
        let mut rest = hyp;
        for slot in idx.iter_mut() {
            *slot = rest % m;
            rest /= m;
        }
        let mut dist = 0.0;
        for (t, &yt) in y.iter().enumerate() {
            let mut mean = C64::new(0.0, 0.0);
            for u in 0..j {
                mean += gains[u][t] * cbs.group(u + 1).codeword(idx[u])[t];
            }
            dist += (yt - mean).norm_sqr();
        }
        let w = (-dist / sigma2).exp();
        for u in 0..j {
            marg[u][idx[u]] += w;
        }
    }
    marg
}

fn argmax(p: &[f64]) -> usize {
    (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b })
}

/// Per-user MPA decisions that equal the brute-force max-marginal
/// decision. Every symbol is an independent instance of the full default
/// graph with its own EPA data-resource gains, known to the decoder.
/// Returns `(agreeing decisions, decisions)`.
pub fn mpa_map_agreement(cbs: &CodebookSet, symbols: usize, snr_db: f64, n_iter: usize, seed: u64) -> (usize, usize) {
    let j = cbs.codebooks().len();
    let t_dim = cbs.resources();
    let layout = ToneLayout::contiguous(72, t_dim);
    let profile = TdlProfile::epa();
    let sigma2 = 10f64.powf(-snr_db / 10.0);
    let sigma = sigma2.sqrt();
    let mut r = rng(seed);
    let mut agree = 0;
    for _ in 0..symbols {
        let gains: Vec<Vec<C64>> = (0..j)
            .map(|_| sample_realization(&profile, &layout, &mut r).h_data)
            .collect();
        let sent: Vec<usize> = (0..j).map(|_| r.random_range(0..cbs.m())).collect();
        let y: Vec<C64> = (0..t_dim)
            .map(|t| {
                let clean: C64 = (0..j).map(|u| gains[u][t] * cbs.group(u + 1).codeword(sent[u])[t]).sum();
                clean + complex_normal(&mut r) * sigma
            })
            .collect();
        let frame = [y];
        let input = DecoderInput {
            y: &frame,
            users: (0..j)
                .map(|u| DecoderUser {
                    codebook: cbs.group(u + 1),
                    gains: gains[u].clone(),
                })
                .collect(),
            sigma2,
            n_iter,
            mode: DecodeMode::Mpa,
            jmpa_theta: 0.5,
        };
        let res = mpa_decode(&input).expect("decode");
        let marg = brute_force_marginals(&frame[0], &gains, cbs, sigma2);
        agree += (0..j).filter(|&u| res.symbols[u][0] == argmax(&marg[u])).count();
    }
    (agree, symbols * j)
}

/// `n_iter * sum_i m^{d_i}` written out with a plain loop.
pub fn complexity_formula(degrees: &[usize], m: u64, n_iter: u64) -> u128 {
    let mut total: u128 = 0;
    for &d in degrees {
        if d == 0 {
            continue;
        }
        let mut p: u128 = 1;
        for _ in 0..d {
            p *= m as u128;
        }
        total += p;
    }
    total * n_iter as u128
}
