//! Zadoff-Chu pilot pool.
//!
//! The pool has `J` groups, one per codebook. Group `g` uses ZC root `u = g`
//! and `L` cyclic shifts of it, so `K = J * L` pilots in total. The root
//! sequence has the largest prime length below the pilot window `Q` and is
//! cyclically extended to `Q` tones.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::{Error, Result, C64};

/// Tones per resource block.
pub const TONES_PER_RB: usize = 12;

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn largest_prime_below(n: usize) -> Option<usize> {
    (2..n).rev().find(|&p| is_prime(p))
}

/// Root Zadoff-Chu sequence `exp(-j pi u n (n+1) / N_zc)`.
pub fn zc_sequence(root: usize, n_zc: usize) -> Result<Vec<C64>> {
    if !is_prime(n_zc) {
        return Err(Error::NotPrime(n_zc));
    }
    if root == 0 || root >= n_zc {
        return Err(Error::RootOutOfRange { root, n_zc });
    }
    Ok((0..n_zc)
        .map(|n| {
            // reduce the exponent mod 2N_zc before going to floating point
            let e = (root * n * (n + 1)) % (2 * n_zc);
            C64::from_polar(1.0, -PI * e as f64 / n_zc as f64)
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct PilotPool {
    q: usize,
    n_zc: usize,
    per_group: usize,
    sequences: Vec<Vec<C64>>,
    group_of: Vec<usize>,
    shift_of: Vec<usize>,
}

impl PilotPool {
    /// Pool size `K`.
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Pilot length `Q` in tones.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_zc(&self) -> usize {
        self.n_zc
    }

    pub fn groups(&self) -> usize {
        self.len() / self.per_group
    }

    pub fn per_group(&self) -> usize {
        self.per_group
    }

    /// Unnormalized pilot `k` (0-based), unit modulus per tone.
    pub fn sequence(&self, k: usize) -> &[C64] {
        &self.sequences[k]
    }

    pub fn sequences(&self) -> &[Vec<C64>] {
        &self.sequences
    }

    /// Codebook group (1-based) bound to pilot `k`.
    pub fn group_of(&self, k: usize) -> usize {
        self.group_of[k]
    }

    /// Cyclic shift index of pilot `k` within its group.
    pub fn shift_of(&self, k: usize) -> usize {
        self.shift_of[k]
    }

    /// ZC root of pilot `k`.
    pub fn root_of(&self, k: usize) -> usize {
        self.group_of[k]
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k < self.len() {
            Ok(())
        } else {
            Err(Error::PilotIndex {
                index: k,
                size: self.len(),
            })
        }
    }
}

pub fn build_pilot_pool(groups: usize, per_group: usize, rb_count: usize) -> Result<PilotPool> {
    if groups == 0 || per_group == 0 || rb_count == 0 {
        return Err(Error::PilotPool("J, L and rb_count must be positive".into()));
    }
    let q = TONES_PER_RB * rb_count;
    let n_zc = largest_prime_below(q)
        .ok_or_else(|| Error::PilotPool(format!("no prime below Q={q}")))?;
    if per_group > n_zc {
        return Err(Error::PilotPool(format!(
            "L={per_group} cyclic shifts exceed N_zc={n_zc}"
        )));
    }
    if groups >= n_zc {
        return Err(Error::PilotPool(format!(
            "J={groups} roots do not fit below N_zc={n_zc}"
        )));
    }
    let stride = n_zc / per_group;
    let mut sequences = Vec::with_capacity(groups * per_group);
    let mut group_of = Vec::with_capacity(groups * per_group);
    let mut shift_of = Vec::with_capacity(groups * per_group);
    for g in 1..=groups {
        let root = zc_sequence(g, n_zc)?;
        for shift in 0..per_group {
            let offset = shift * stride;
            sequences.push((0..q).map(|n| root[(n % n_zc + offset) % n_zc]).collect());
            group_of.push(g);
            shift_of.push(shift);
        }
    }
    Ok(PilotPool {
        q,
        n_zc,
        per_group,
        sequences,
        group_of,
        shift_of,
    })
}

/// `Q x K` matrix whose columns are the pilots scaled to unit 2-norm.
pub fn pilot_matrix(pool: &PilotPool) -> DMatrix<C64> {
    let q = pool.q();
    DMatrix::from_fn(q, pool.len(), |n, k| {
        pool.sequence(k)[n] / (q as f64).sqrt()
    })
}

/// Writes the normalized pilot matrix row-major, one quoted `re,im` cell
/// per pilot.
pub fn write_pilot_csv(pool: &PilotPool, path: impl AsRef<Path>) -> Result<()> {
    let s = pilot_matrix(pool);
    let mut out = String::new();
    for n in 0..s.nrows() {
        let row: Vec<String> = (0..s.ncols())
            .map(|k| format!("\"{},{}\"", s[(n, k)].re + 0.0, s[(n, k)].im + 0.0))
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    let path = path.as_ref();
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inner(a: &[C64], b: &[C64]) -> C64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    }

    #[test]
    fn zc_basics() {
        for root in [1, 5, 25, 70] {
            let s = zc_sequence(root, 71).unwrap();
            assert_eq!(s[0], C64::new(1.0, 0.0));
            assert!(s.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn zc_ideal_autocorrelation() {
        for n_zc in [11, 71] {
            let s = zc_sequence(3.min(n_zc - 1), n_zc).unwrap();
            for lag in 1..n_zc {
                let c: C64 = (0..n_zc).map(|n| s[(n + lag) % n_zc] * s[n].conj()).sum();
                assert!(c.norm() <= 1e-9 * n_zc as f64, "lag {lag}: {}", c.norm());
            }
        }
    }

    #[test]
    fn zc_errors() {
        assert!(matches!(zc_sequence(1, 72), Err(Error::NotPrime(72))));
        assert!(matches!(zc_sequence(0, 71), Err(Error::RootOutOfRange { .. })));
        assert!(matches!(zc_sequence(71, 71), Err(Error::RootOutOfRange { .. })));
    }

    #[test]
    fn default_pool_shape() {
        let pool = build_pilot_pool(6, 3, 6).unwrap();
        assert_eq!(pool.len(), 18);
        assert_eq!(pool.q(), 72);
        assert_eq!(pool.n_zc(), 71);
        for k in 0..3 {
            assert_eq!(pool.group_of(k), 1);
            assert_eq!(pool.root_of(k), 1);
        }
        let s = pilot_matrix(&pool);
        assert_eq!(s.shape(), (72, 18));
        for k in 0..18 {
            assert!((s.column(k).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_pool() {
        let pool = build_pilot_pool(1, 1, 1).unwrap();
        assert_eq!((pool.len(), pool.q(), pool.n_zc()), (1, 12, 11));
    }

    #[test]
    fn too_many_shifts() {
        assert!(build_pilot_pool(1, 12, 1).is_err());
    }

    #[test]
    fn groups_partition_pool() {
        let pool = build_pilot_pool(6, 3, 6).unwrap();
        for g in 1..=6 {
            assert_eq!((0..18).filter(|&k| pool.group_of(k) == g).count(), 3);
        }
    }

    #[test]
    fn same_root_shifts_orthogonal() {
        let pool = build_pilot_pool(6, 3, 6).unwrap();
        let n_zc = pool.n_zc();
        for g in 0..6 {
            for a in 0..3 {
                for b in a + 1..3 {
                    let (sa, sb) = (pool.sequence(3 * g + a), pool.sequence(3 * g + b));
                    let before = inner(&sa[..n_zc], &sb[..n_zc]);
                    assert!(before.norm() <= 1e-9 * n_zc as f64);
                    let after = inner(sa, sb).norm() / pool.q() as f64;
                    assert!(after <= 0.05, "{after}");
                }
            }
        }
    }

    #[test]
    fn cross_root_coherence() {
        let pool = build_pilot_pool(6, 3, 6).unwrap();
        let bound = 2.0 / (pool.n_zc() as f64).sqrt();
        let mut worst: f64 = 0.0;
        for i in 0..18 {
            for j in 0..18 {
                if pool.root_of(i) != pool.root_of(j) {
                    let c = inner(pool.sequence(i), pool.sequence(j)).norm() / pool.q() as f64;
                    worst = worst.max(c);
                }
            }
        }
        assert!(worst <= bound, "{worst} > {bound}");
    }

    #[test]
    fn csv_dump_shape() {
        let pool = build_pilot_pool(2, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_pilot_csv(&pool, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 12);
        assert_eq!(text.lines().next().unwrap().matches('"').count(), 8);
    }
}
