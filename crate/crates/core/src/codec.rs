//! SCMA codebooks and the resource/UE factor graph.
//!
//! A codebook maps `log2(M)` bits to one of `M` sparse `T`-dimensional complex
//! codewords. Every codeword of a codebook occupies the same `N` resources,
//! given by that codebook's column of the factor graph.

use std::path::Path;

use serde::Deserialize;

use crate::{Error, Result, C64};

const DEFAULT_CODEBOOK_JSON: &str = include_str!("../assets/codebook_default.json");

/// Magnitude below which a codeword entry counts as zero.
const ZERO_TOL: f64 = 1e-12;
const ENERGY_TOL: f64 = 1e-9;

/// Resource-occupancy structure shared by the codebooks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    resources: usize,
    per_codeword: usize,
    /// Occupied resources of each codebook, ascending.
    columns: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl FactorGraph {
    /// Number of resource nodes `T` (codeword dimension).
    pub fn resources(&self) -> usize {
        self.resources
    }

    /// Number of codebooks `J`.
    pub fn codebooks(&self) -> usize {
        self.columns.len()
    }

    /// Nonzeros per codeword `N`.
    pub fn per_codeword(&self) -> usize {
        self.per_codeword
    }

    /// Resources touched by codebook column `j` (0-based).
    pub fn column(&self, j: usize) -> &[usize] {
        &self.columns[j]
    }

    pub fn occupied(&self, resource: usize, j: usize) -> bool {
        self.columns[j].contains(&resource)
    }

    /// Per-resource degree `d(i)` with every codebook present once.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Dense `T x J` occupancy matrix.
    pub fn occupancy(&self) -> Vec<Vec<u8>> {
        (0..self.resources)
            .map(|i| {
                (0..self.codebooks())
                    .map(|j| u8::from(self.occupied(i, j)))
                    .collect()
            })
            .collect()
    }

    /// Degrees when only the codebooks listed in `active` are present.
    /// Repeated entries count once per occurrence.
    pub fn degrees_for(&self, active: &[usize]) -> Vec<usize> {
        let mut d = vec![0; self.resources];
        for &j in active {
            for &i in &self.columns[j] {
                d[i] += 1;
            }
        }
        d
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Canonical factor graph: the columns are the `j` lexicographically first
/// `n`-subsets of the `t` resources.
pub fn build_factor_graph(t: usize, j: usize, n: usize) -> Result<FactorGraph> {
    let available = binomial(t, n);
    if n == 0 || j == 0 || available < j as u128 {
        return Err(Error::InfeasibleGraph { t, n, j, available });
    }
    let mut columns = Vec::with_capacity(j);
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        columns.push(subset.clone());
        if columns.len() == j {
            break;
        }
        // advance to the next n-subset in lexicographic order
        let mut pos = n - 1;
        while subset[pos] == t - n + pos {
            pos -= 1;
        }
        subset[pos] += 1;
        for k in pos + 1..n {
            subset[k] = subset[k - 1] + 1;
        }
    }
    let mut degrees = vec![0; t];
    for col in &columns {
        for &i in col {
            degrees[i] += 1;
        }
    }
    if degrees.contains(&0) {
        return Err(Error::InfeasibleGraph { t, n, j, available });
    }
    Ok(FactorGraph {
        resources: t,
        per_codeword: n,
        columns,
        degrees,
    })
}

/// One group's codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    group: usize,
    entries: Vec<Vec<C64>>,
    support: Vec<usize>,
}

impl Codebook {
    /// CTU group id, 1-based.
    pub fn group(&self) -> usize {
        self.group
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.entries.len().trailing_zeros() as usize
    }

    pub fn entries(&self) -> &[Vec<C64>] {
        &self.entries
    }

    pub fn codeword(&self, index: usize) -> &[C64] {
        &self.entries[index]
    }

    /// Resources this codebook occupies.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Maps `bits` (big-endian per symbol) to codeword indices.
    pub fn encode(&self, bits: &[u8]) -> Result<CodewordStream> {
        let bps = self.bits_per_symbol();
        if !bits.len().is_multiple_of(bps) {
            return Err(Error::BitLength {
                len: bits.len(),
                bits_per_symbol: bps,
            });
        }
        let symbols = bits.chunks(bps).map(bits_to_index).collect();
        Ok(CodewordStream {
            symbols,
            bits_consumed: bits.len(),
        })
    }

    /// Codewords for a stream, one `T`-vector per symbol.
    pub fn modulate<'a>(&'a self, stream: &'a CodewordStream) -> impl Iterator<Item = &'a [C64]> + 'a {
        stream.symbols.iter().map(move |&m| self.codeword(m))
    }

    /// Index of the codeword closest to `x` in Euclidean distance.
    pub fn nearest(&self, x: &[C64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (m, cw) in self.entries.iter().enumerate() {
            let d: f64 = cw.iter().zip(x).map(|(a, b)| (a - b).norm_sqr()).sum();
            if d < best.1 {
                best = (m, d);
            }
        }
        best.0
    }

    pub fn mean_energy(&self) -> f64 {
        let total: f64 = self
            .entries
            .iter()
            .map(|cw| cw.iter().map(|x| x.norm_sqr()).sum::<f64>())
            .sum();
        total / self.entries.len() as f64
    }
}

/// Big-endian bits to index.
pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

/// Index to `width` big-endian bits.
pub fn index_to_bits(index: usize, width: usize) -> impl Iterator<Item = u8> {
    (0..width).rev().map(move |k| ((index >> k) & 1) as u8)
}

/// Codeword indices produced from a bit sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordStream {
    pub symbols: Vec<usize>,
    pub bits_consumed: usize,
}

/// All codebooks of the CTU together with their factor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    graph: FactorGraph,
    codebooks: Vec<Codebook>,
}

impl CodebookSet {
    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    /// Codebook of a 1-based group id.
    pub fn group(&self, group: usize) -> &Codebook {
        &self.codebooks[group - 1]
    }

    /// Codewords per codebook.
    pub fn m(&self) -> usize {
        self.codebooks[0].size()
    }

    pub fn resources(&self) -> usize {
        self.graph.resources()
    }
}

#[derive(Deserialize)]
struct CodebookFile {
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    codebooks: Vec<CodebookEntry>,
}

#[derive(Deserialize)]
struct CodebookEntry {
    group: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

/// Reads and validates a codebook JSON file against `graph`.
pub fn load_codebook(path: impl AsRef<Path>, graph: &FactorGraph) -> Result<CodebookSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_codebook(&text, graph)
}

/// Validates codebook JSON text against `graph`.
pub fn parse_codebook(text: &str, graph: &FactorGraph) -> Result<CodebookSet> {
    let file: CodebookFile =
        serde_json::from_str(text).map_err(|e| Error::MalformedCodebook(e.to_string()))?;
    if file.t != graph.resources() || file.n != graph.per_codeword() {
        return Err(Error::MalformedCodebook(format!(
            "file declares T={} N={}, graph has T={} N={}",
            file.t,
            file.n,
            graph.resources(),
            graph.per_codeword()
        )));
    }
    if file.m < 2 || !file.m.is_power_of_two() {
        return Err(Error::MalformedCodebook(format!(
            "M={} is not a power of two",
            file.m
        )));
    }
    if file.codebooks.len() != graph.codebooks() {
        return Err(Error::MalformedCodebook(format!(
            "{} codebooks for a graph with {} columns",
            file.codebooks.len(),
            graph.codebooks()
        )));
    }
    let mut codebooks = Vec::with_capacity(file.codebooks.len());
    for (col, entry) in file.codebooks.into_iter().enumerate() {
        if entry.group != col + 1 {
            return Err(Error::MalformedCodebook(format!(
                "codebook #{} has group {}, expected {}",
                col,
                entry.group,
                col + 1
            )));
        }
        if entry.entries.len() != file.m {
            return Err(Error::MalformedCodebook(format!(
                "group {} has {} codewords, expected {}",
                entry.group,
                entry.entries.len(),
                file.m
            )));
        }
        let support = graph.column(col).to_vec();
        let mut entries = Vec::with_capacity(file.m);
        for (index, raw) in entry.entries.iter().enumerate() {
            if raw.len() != file.t {
                return Err(Error::MalformedCodebook(format!(
                    "group {} codeword {} has length {}",
                    entry.group,
                    index,
                    raw.len()
                )));
            }
            let cw: Vec<C64> = raw.iter().map(|&[re, im]| C64::new(re, im)).collect();
            let nonzero: Vec<usize> = (0..file.t).filter(|&i| cw[i].norm() > ZERO_TOL).collect();
            if let Some(&stray) = nonzero.iter().find(|i| !support.contains(i)) {
                return Err(Error::SparsityMismatch {
                    group: entry.group,
                    index,
                    reason: format!("nonzero at unoccupied resource {stray}"),
                });
            }
            if nonzero.len() != graph.per_codeword() {
                return Err(Error::SparsityMismatch {
                    group: entry.group,
                    index,
                    reason: format!(
                        "{} nonzeros, expected {}",
                        nonzero.len(),
                        graph.per_codeword()
                    ),
                });
            }
            entries.push(cw);
        }
        let cb = Codebook {
            group: entry.group,
            entries,
            support,
        };
        let energy = cb.mean_energy();
        if (energy - 1.0).abs() > ENERGY_TOL {
            return Err(Error::EnergyNotNormalized {
                group: cb.group,
                energy,
            });
        }
        codebooks.push(cb);
    }
    Ok(CodebookSet {
        graph: graph.clone(),
        codebooks,
    })
}

/// The shipped T=4, N=2, M=4, J=6 codebook: a 4-point mother constellation
/// with per-resource phase rotations of 0, pi/3 and 2pi/3.
pub fn default_codebooks() -> CodebookSet {
    let graph = build_factor_graph(4, 6, 2).expect("default graph");
    parse_codebook(DEFAULT_CODEBOOK_JSON, &graph).expect("shipped codebook is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_all_pairs_of_four() {
        let g = build_factor_graph(4, 6, 2).unwrap();
        assert_eq!(g.degrees(), &[3, 3, 3, 3]);
        let cols: Vec<_> = (0..6).map(|j| g.column(j).to_vec()).collect();
        assert_eq!(
            cols,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        let nz: usize = g.occupancy().iter().flatten().map(|&x| x as usize).sum();
        assert_eq!(nz, 2 * 6);
    }

    #[test]
    fn graph_single_full_column() {
        let g = build_factor_graph(4, 1, 4).unwrap();
        assert_eq!(g.degrees(), &[1, 1, 1, 1]);
        assert_eq!(g.column(0), &[0, 1, 2, 3]);
    }

    #[test]
    fn graph_infeasible() {
        assert!(matches!(
            build_factor_graph(4, 7, 2),
            Err(Error::InfeasibleGraph { available: 6, .. })
        ));
    }

    #[test]
    fn default_set_groups() {
        let set = default_codebooks();
        let groups: Vec<_> = set.codebooks().iter().map(|c| c.group()).collect();
        assert_eq!(groups, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(set.m(), 4);
        for cb in set.codebooks() {
            assert!((cb.mean_energy() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn three_nonzeros_rejected() {
        let g = build_factor_graph(4, 6, 2).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CODEBOOK_JSON).unwrap();
        v["codebooks"][0]["entries"][1][2] = serde_json::json!([0.5, 0.0]);
        let err = parse_codebook(&v.to_string(), &g).unwrap_err();
        assert!(matches!(err, Error::SparsityMismatch { group: 1, index: 1, .. }), "{err}");
    }

    #[test]
    fn wrong_count_of_nonzeros_on_support() {
        let g = build_factor_graph(4, 6, 2).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CODEBOOK_JSON).unwrap();
        v["codebooks"][2]["entries"][0][0] = serde_json::json!([0.0, 0.0]);
        assert!(matches!(
            parse_codebook(&v.to_string(), &g),
            Err(Error::SparsityMismatch { group: 3, .. })
        ));
    }

    #[test]
    fn energy_checked() {
        let g = build_factor_graph(4, 6, 2).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CODEBOOK_JSON).unwrap();
        v["codebooks"][0]["entries"][0][0] = serde_json::json!([-1.0, 0.0]);
        assert!(matches!(
            parse_codebook(&v.to_string(), &g),
            Err(Error::EnergyNotNormalized { group: 1, .. })
        ));
    }

    #[test]
    fn empty_file_is_malformed() {
        let g = build_factor_graph(4, 6, 2).unwrap();
        assert!(matches!(parse_codebook("", &g), Err(Error::MalformedCodebook(_))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.json");
        std::fs::write(&p, "").unwrap();
        assert!(matches!(load_codebook(&p, &g), Err(Error::MalformedCodebook(_))));
    }

    #[test]
    fn encode_fourteen_bits() {
        let set = default_codebooks();
        let cb = set.group(1);
        let bits = [0, 0, 0, 1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 0];
        let s = cb.encode(&bits).unwrap();
        assert_eq!(s.symbols, vec![0, 1, 2, 3, 0, 3, 2]);
        assert_eq!(s.bits_consumed, 14);
        assert_eq!(s.bits_consumed, s.symbols.len() * cb.bits_per_symbol());
        let first = cb.modulate(&s).next().unwrap();
        assert_eq!(first, cb.codeword(0));
        for x in cb.modulate(&s) {
            assert_eq!(x.iter().filter(|v| v.norm() > 0.0).count(), 2);
        }
    }

    #[test]
    fn encode_rejects_odd_length() {
        let set = default_codebooks();
        assert!(matches!(
            set.group(2).encode(&[1, 0, 1]),
            Err(Error::BitLength { len: 3, bits_per_symbol: 2 })
        ));
    }

    #[test]
    fn index_round_trip_through_codewords() {
        let set = default_codebooks();
        for cb in set.codebooks() {
            for m in 0..cb.size() {
                let bits: Vec<u8> = index_to_bits(m, cb.bits_per_symbol()).collect();
                let s = cb.encode(&bits).unwrap();
                assert_eq!(cb.nearest(cb.codeword(s.symbols[0])), m);
            }
        }
    }
}
