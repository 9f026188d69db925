//! Library output against brute-force references.

mod common;

use std::time::Instant;

use gfscma::codec::default_codebooks;

#[test]
fn focuss_matches_exhaustive_support_search() {
    let t = Instant::now();
    let (hits, n) = common::focuss_oracle_agreement(200, 7, 8, 11);
    eprintln!("focuss {hits}/{n} in {:?}", t.elapsed());
    assert!(hits as f64 >= 0.99 * n as f64, "{hits}/{n}");
}

#[test]
fn mpa_matches_brute_force_marginals() {
    let t = Instant::now();
    let (agree, n) = common::mpa_map_agreement(&default_codebooks(), 10_000, 8.0, 6, 1);
    eprintln!("mpa {agree}/{n} in {:?}", t.elapsed());
    assert!(agree as f64 >= 0.995 * n as f64, "{agree}/{n}");
}

/// Groups 1-3 share resource 0 and nothing else, so their factor graph is a
/// tree and sum-product must reproduce the exact marginals.
#[test]
fn mpa_is_exact_on_a_tree() {
    use gfscma::channel::complex_normal;
    use gfscma::mpa::{mpa_decode, DecodeMode, DecoderInput, DecoderUser};
    use gfscma::C64;
    use rand::Rng;

    let cbs = default_codebooks();
    let mut r = common::rng(3);
    let sigma2: f64 = 0.3;
    for _ in 0..50 {
        let gains: Vec<Vec<C64>> = (0..3).map(|_| (0..4).map(|_| complex_normal(&mut r)).collect()).collect();
        let sent: Vec<usize> = (0..3).map(|_| r.random_range(0..4)).collect();
        let y: Vec<C64> = (0..4)
            .map(|t| {
                let clean: C64 = (0..3).map(|u| gains[u][t] * cbs.group(u + 1).codeword(sent[u])[t]).sum();
                clean + complex_normal(&mut r) * sigma2.sqrt()
            })
            .collect();
        let frame = [y];
        let input = DecoderInput {
            y: &frame,
            users: (0..3)
                .map(|u| DecoderUser {
                    codebook: cbs.group(u + 1),
                    gains: gains[u].clone(),
                })
                .collect(),
            sigma2,
            n_iter: 3,
            mode: DecodeMode::Mpa,
            jmpa_theta: 0.5,
        };
        let res = mpa_decode(&input).unwrap();
        let exact = common::brute_force_marginals(&frame[0], &gains, &cbs, sigma2);
        for u in 0..3 {
            let total: f64 = exact[u].iter().sum();
            for m in 0..4 {
                let p = exact[u][m] / total;
                assert!((res.posteriors[u][0][m] - p).abs() < 1e-9, "user {u} codeword {m}");
            }
        }
    }
}
