//! Systematic linear block codes for the EDC/ECC ladder.
//!
//! Codeword layout: data bits in positions `0..k`, check bits in `k..n`.
//! The parity-check matrix is stored column-wise; column `j` is the syndrome
//! produced by flipping bit `j`, with bit `i` of the column being row `i` of H.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::configspec::EccLevel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EccError {
    #[error("{level} is not supported at k={k}")]
    Unsupported { level: EccLevel, k: u32 },
    #[error("construction invariant violated: {0}")]
    Construction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EccStatus {
    Ok,
    Corrected,
    DetectedUncorrectable,
}

impl EccStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EccStatus::Ok => "ok",
            EccStatus::Corrected => "corrected",
            EccStatus::DetectedUncorrectable => "detected_uncorrectable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    pub status: EccStatus,
    pub data: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EccScheme {
    level: EccLevel,
    k: u32,
    r: u32,
    columns: Vec<u32>,
    /// Check bit `i` is the parity of `data & check_masks[i]`.
    check_masks: Vec<u32>,
    /// Indexed by syndrome; `Some(pattern)` for correctable syndromes.
    syndrome_table: Vec<Option<u64>>,
}

fn parity32(x: u32) -> u32 {
    x.count_ones() & 1
}

/// Inverts an r×r GF(2) matrix given as columns.
fn invert_columns(cols: &[u32]) -> Option<Vec<u32>> {
    let r = cols.len();
    // rows[i]: bits 0..r are row i of B, bits r..2r are row i of the identity
    let mut rows: Vec<u64> = (0..r)
        .map(|i| {
            let mut row = 0u64;
            for (j, c) in cols.iter().enumerate() {
                if c >> i & 1 == 1 {
                    row |= 1 << j;
                }
            }
            row | 1 << (r + i)
        })
        .collect();
    for col in 0..r {
        let pivot = (col..r).find(|&i| rows[i] >> col & 1 == 1)?;
        rows.swap(col, pivot);
        for i in 0..r {
            if i != col && rows[i] >> col & 1 == 1 {
                rows[i] ^= rows[col];
            }
        }
    }
    // inverse column j has bit i = row i, bit r+j
    Some(
        (0..r)
            .map(|j| {
                (0..r).fold(0u32, |acc, i| acc | (((rows[i] >> (r + j)) & 1) as u32) << i)
            })
            .collect(),
    )
}

fn apply_columns(cols: &[u32], v: u32) -> u32 {
    cols.iter()
        .enumerate()
        .filter(|(i, _)| v >> i & 1 == 1)
        .fold(0, |acc, (_, c)| acc ^ c)
}

/// Calls `f` for every n-bit pattern of exactly `weight` set bits, in
/// lexicographic order of bit positions.
pub fn for_each_pattern(n: u32, weight: u32, mut f: impl FnMut(u64)) {
    fn rec(n: u32, start: u32, left: u32, acc: u64, f: &mut impl FnMut(u64)) {
        if left == 0 {
            f(acc);
            return;
        }
        for bit in start..=n - left {
            rec(n, bit + 1, left - 1, acc | 1 << bit, f);
        }
    }
    if weight <= n {
        rec(n, 0, weight, 0, &mut f);
    }
}

/// Data columns for the DECTED code: unit columns for the check bits, then
/// candidates in increasing integer order, each accepted iff it is not the
/// sum of 1..=4 columns already chosen (so no codeword of weight ≤ 5).
fn greedy_dected_columns(k: u32, r: u32) -> Option<Vec<u32>> {
    let size = 1usize << r;
    // reach[m][v]: v is a sum of at most m chosen columns
    let mut reach = vec![vec![false; size]; 5];
    for row in reach.iter_mut() {
        row[0] = true;
    }
    let add = |reach: &mut Vec<Vec<bool>>, c: u32| {
        for m in (1..5).rev() {
            for v in 0..size {
                if reach[m - 1][v] {
                    reach[m][v ^ c as usize] = true;
                }
            }
        }
    };
    for i in 0..r {
        add(&mut reach, 1 << i);
    }
    let mut data = Vec::with_capacity(k as usize);
    for c in 1..size as u32 {
        if reach[4][c as usize] {
            continue;
        }
        data.push(c);
        add(&mut reach, c);
        if data.len() == k as usize {
            return Some(data);
        }
    }
    None
}

fn secded_columns(k: u32) -> (u32, Vec<u32>) {
    let mut h = 1;
    while (1u32 << h) < k + h + 1 {
        h += 1;
    }
    let parity_row = 1 << h;
    let data: Vec<u32> = (3u32..)
        .filter(|c| !c.is_power_of_two())
        .take(k as usize)
        .map(|c| c | parity_row)
        .collect();
    let mut cols = data;
    cols.extend((0..h).map(|i| 1 << i | parity_row));
    cols.push(parity_row);
    (h + 1, cols)
}

impl EccScheme {
    fn from_columns(level: EccLevel, k: u32, r: u32, columns: Vec<u32>) -> Result<Self, EccError> {
        let (data_cols, check_cols) = columns.split_at(k as usize);
        let inv = invert_columns(check_cols)
            .ok_or_else(|| EccError::Construction("check-bit submatrix is singular".into()))?;
        // p = B^-1 A d
        let transformed: Vec<u32> = data_cols.iter().map(|&c| apply_columns(&inv, c)).collect();
        let check_masks = (0..r)
            .map(|i| {
                transformed
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| *c >> i & 1 == 1)
                    .fold(0u32, |m, (j, _)| m | 1 << j)
            })
            .collect();

        let mut scheme = EccScheme {
            level,
            k,
            r,
            columns,
            check_masks,
            syndrome_table: vec![None; 1 << r],
        };
        scheme.syndrome_table[0] = Some(0);
        let (t_correct, _) = level.capability();
        let n = scheme.n();
        for w in 1..=t_correct {
            let mut clash = None;
            for_each_pattern(n, w, |pattern| {
                let s = scheme.syndrome(pattern) as usize;
                if scheme.syndrome_table[s].is_some() && clash.is_none() {
                    clash = Some(pattern);
                }
                scheme.syndrome_table[s] = Some(pattern);
            });
            if let Some(p) = clash {
                return Err(EccError::Construction(format!(
                    "pattern {p:#x} shares a syndrome with a lighter or equal pattern"
                )));
            }
        }
        Ok(scheme)
    }

    pub fn level(&self) -> EccLevel {
        self.level
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn n(&self) -> u32 {
        self.k + self.r
    }

    /// `(t_correct, t_detect)`.
    pub fn capability(&self) -> (u32, u32) {
        self.level.capability()
    }

    pub fn columns(&self) -> &[u32] {
        &self.columns
    }

    /// Rows of H as n-bit masks.
    pub fn parity_check_rows(&self) -> Vec<u64> {
        (0..self.r)
            .map(|i| {
                self.columns
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| *c >> i & 1 == 1)
                    .fold(0u64, |m, (j, _)| m | 1 << j)
            })
            .collect()
    }

    pub fn syndrome_table(&self) -> &[Option<u64>] {
        &self.syndrome_table
    }

    pub fn data_mask(&self) -> u32 {
        if self.k == 32 {
            u32::MAX
        } else {
            (1 << self.k) - 1
        }
    }

    pub fn codeword_mask(&self) -> u64 {
        (1u64 << self.n()) - 1
    }

    pub fn encode(&self, data: u32) -> u64 {
        let data = data & self.data_mask();
        let check = self
            .check_masks
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, m)| acc | u64::from(parity32(data & m)) << i);
        u64::from(data) | check << self.k
    }

    pub fn syndrome(&self, codeword: u64) -> u32 {
        let mut bits = codeword & self.codeword_mask();
        let mut s = 0;
        while bits != 0 {
            let j = bits.trailing_zeros();
            s ^= self.columns[j as usize];
            bits &= bits - 1;
        }
        s
    }

    pub fn extract(&self, codeword: u64) -> u32 {
        (codeword & u64::from(self.data_mask())) as u32
    }

    pub fn decode(&self, codeword: u64) -> Decoded {
        let s = self.syndrome(codeword);
        if s == 0 {
            return Decoded {
                status: EccStatus::Ok,
                data: self.extract(codeword),
            };
        }
        match self.syndrome_table[s as usize] {
            Some(pattern) => Decoded {
                status: EccStatus::Corrected,
                data: self.extract(codeword ^ pattern),
            },
            None => Decoded {
                status: EccStatus::DetectedUncorrectable,
                data: self.extract(codeword),
            },
        }
    }

    /// Minimum weight over all non-zero codewords, by enumerating every data
    /// value. `None` when k > 16.
    pub fn brute_force_min_distance(&self) -> Option<u32> {
        if self.k > 16 {
            return None;
        }
        (1..1u32 << self.k)
            .map(|d| self.encode(d).count_ones())
            .min()
            .or(Some(self.n()))
    }

    /// Copy with the table entries for single-bit flips at `a` and `b`
    /// exchanged. Used only by the syndrome_swap bug mutation.
    pub fn with_swapped_syndromes(&self, a: u32, b: u32) -> EccScheme {
        let mut out = self.clone();
        let (sa, sb) = (self.columns[a as usize] as usize, self.columns[b as usize] as usize);
        out.syndrome_table.swap(sa, sb);
        out
    }
}

/// Builds and verifies the scheme for `(level, k)`.
pub fn build_ecc(level: EccLevel, k: u32) -> Result<EccScheme, EccError> {
    if !level.supports_width(k) {
        return Err(EccError::Unsupported { level, k });
    }
    let scheme = match level {
        EccLevel::None => EccScheme::from_columns(level, k, 0, vec![0; k as usize])?,
        EccLevel::Sed => EccScheme::from_columns(level, k, 1, vec![1; k as usize + 1])?,
        EccLevel::Secded => {
            let (r, cols) = secded_columns(k);
            EccScheme::from_columns(level, k, r, cols)?
        }
        EccLevel::Dected => {
            let mut r = 1;
            let data = loop {
                if let Some(data) = greedy_dected_columns(k, r) {
                    break data;
                }
                r += 1;
            };
            let mut cols = data;
            cols.extend((0..r).map(|i| 1 << i));
            EccScheme::from_columns(level, k, r, cols)?
        }
    };
    let (tc, td) = level.capability();
    if let Some(d) = scheme.brute_force_min_distance() {
        if d < tc + td + 1 {
            return Err(EccError::Construction(format!(
                "minimum distance {d} below {}",
                tc + td + 1
            )));
        }
    }
    Ok(scheme)
}

/// Process-wide memoized [`build_ecc`]. Construction at k=16 enumerates
/// every codeword, so models share one verified instance per `(level, k)`.
pub fn shared_scheme(level: EccLevel, k: u32) -> Result<Arc<EccScheme>, EccError> {
    type Cache = Mutex<HashMap<(EccLevel, u32), Arc<EccScheme>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(s) = cache.lock().unwrap().get(&(level, k)) {
        return Ok(Arc::clone(s));
    }
    let built = Arc::new(build_ecc(level, k)?);
    Ok(Arc::clone(
        cache.lock().unwrap().entry((level, k)).or_insert(built),
    ))
}

/// What the capability guarantee says about an error of weight `w`, or
/// `None` where it makes no claim. With `(t_correct, t_detect)` and minimum
/// distance `t_correct + t_detect + 1`, weights up to `t_correct` correct and
/// weights up to `t_detect` are detected.
pub fn expected_status(capability: (u32, u32), w: u32) -> Option<EccStatus> {
    let (tc, td) = capability;
    match w {
        0 => Some(EccStatus::Ok),
        _ if w <= tc => Some(EccStatus::Corrected),
        _ if w <= td => Some(EccStatus::DetectedUncorrectable),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub data: u32,
    pub pattern: u64,
    pub syndrome: u32,
    pub expected: EccStatus,
    pub got: Decoded,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CapabilityReport {
    /// Patterns enumerated per weight, summed over data values.
    pub cases: Vec<u64>,
    /// Cases covered by the guarantee.
    pub checked: u64,
    pub violations: Vec<Violation>,
    /// Weights beyond the guarantee whose decode still claimed success
    /// (`ok` or `corrected`); informational.
    pub beyond_radius_miscorrections: u64,
}

/// Decodes `encode(d) ^ e` for every `d` in `data` and every `e` of weight
/// `0..=max_weight`, comparing against [`expected_status`].
pub fn check_capability(scheme: &EccScheme, data: &[u32], max_weight: u32) -> CapabilityReport {
    let cap = scheme.capability();
    let mut report = CapabilityReport {
        cases: vec![0; max_weight as usize + 1],
        ..CapabilityReport::default()
    };
    for &d in data {
        let cw = scheme.encode(d);
        for w in 0..=max_weight {
            let expect = expected_status(cap, w);
            for_each_pattern(scheme.n(), w, |e| {
                report.cases[w as usize] += 1;
                let got = scheme.decode(cw ^ e);
                match expect {
                    Some(exp) => {
                        report.checked += 1;
                        let data_ok = exp == EccStatus::DetectedUncorrectable || got.data == d;
                        if got.status != exp || !data_ok {
                            report.violations.push(Violation {
                                data: d,
                                pattern: e,
                                syndrome: scheme.syndrome(e),
                                expected: exp,
                                got,
                            });
                        }
                    }
                    None => {
                        if got.status != EccStatus::DetectedUncorrectable {
                            report.beyond_radius_miscorrections += 1;
                        }
                    }
                }
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    /// H·c computed row by row from the parity-check rows.
    fn h_times(scheme: &EccScheme, cw: u64) -> u32 {
        scheme
            .parity_check_rows()
            .iter()
            .enumerate()
            .fold(0, |s, (i, row)| s | ((row & cw).count_ones() & 1) << i)
    }

    #[test]
    fn none_is_identity() {
        let s = build_ecc(EccLevel::None, 8).unwrap();
        assert_eq!((s.r(), s.n()), (0, 8));
        for d in 0..256 {
            assert_eq!(s.encode(d), u64::from(d));
            assert_eq!(
                s.decode(u64::from(d)),
                Decoded {
                    status: EccStatus::Ok,
                    data: d
                }
            );
        }
    }

    #[test]
    fn secded_8_shape() {
        let s = build_ecc(EccLevel::Secded, 8).unwrap();
        assert_eq!((s.r(), s.n()), (5, 13));
        // brute-force distance oracle over all 256 codewords
        let d = (1..256u32).map(|v| s.encode(v).count_ones()).min().unwrap();
        assert_eq!(d, 4);
    }

    #[test]
    fn secded_widths() {
        assert_eq!(build_ecc(EccLevel::Secded, 16).unwrap().r(), 6);
        assert_eq!(build_ecc(EccLevel::Secded, 32).unwrap().r(), 7);
    }

    #[test]
    fn dected_golden_shape() {
        let s8 = build_ecc(EccLevel::Dected, 8).unwrap();
        assert_eq!((s8.r(), s8.n()), (9, 17));
        assert_eq!(
            &s8.columns()[..8],
            &[31, 103, 171, 213, 301, 342, 439, 475]
        );
        assert!(s8.brute_force_min_distance().unwrap() >= 6);
        let s16 = build_ecc(EccLevel::Dected, 16).unwrap();
        assert_eq!((s16.r(), s16.n()), (11, 27));
        assert_eq!(s16.columns()[15], 1287);
    }

    #[test]
    fn dected_weight2_syndromes_unique() {
        let s = build_ecc(EccLevel::Dected, 8).unwrap();
        let mut seen = std::collections::HashSet::new();
        for w in 0..=2 {
            for_each_pattern(s.n(), w, |p| assert!(seen.insert(h_times(&s, p))));
        }
    }

    #[test]
    fn unsupported_pairs() {
        assert_eq!(
            build_ecc(EccLevel::Dected, 32),
            Err(EccError::Unsupported {
                level: EccLevel::Dected,
                k: 32
            })
        );
        assert!(build_ecc(EccLevel::Secded, 12).is_err());
    }

    #[test]
    fn codewords_are_in_kernel() {
        for level in EccLevel::ALL {
            let s = build_ecc(*level, 8).unwrap();
            assert_eq!(s.encode(0), 0);
            for d in 0..256 {
                let cw = s.encode(d);
                assert_eq!(h_times(&s, cw), 0, "{level} {d}");
                assert_eq!(s.syndrome(cw), 0);
                assert_eq!(s.extract(cw), d);
            }
        }
    }

    #[test]
    fn secded_single_and_double_flips() {
        let s = build_ecc(EccLevel::Secded, 8).unwrap();
        for d in 0..256 {
            let cw = s.encode(d);
            for bit in 0..13 {
                let got = s.decode(cw ^ 1 << bit);
                assert_eq!(got.status, EccStatus::Corrected);
                assert_eq!(got.data, d);
            }
            for_each_pattern(13, 2, |p| {
                assert_eq!(s.decode(cw ^ p).status, EccStatus::DetectedUncorrectable)
            });
        }
    }

    #[test]
    fn pattern_enumeration_counts() {
        let mut count = 0;
        for_each_pattern(17, 3, |p| {
            assert_eq!(p.count_ones(), 3);
            count += 1;
        });
        assert_eq!(count, 680);
        let mut zero = Vec::new();
        for_each_pattern(5, 0, |p| zero.push(p));
        assert_eq!(zero, vec![0]);
    }

    #[test]
    fn swapped_syndromes_miscorrect() {
        let s = build_ecc(EccLevel::Secded, 8).unwrap();
        let bad = s.with_swapped_syndromes(0, 1);
        let got = bad.decode(s.encode(0x5a) ^ 1);
        assert_eq!(got.status, EccStatus::Corrected);
        assert_ne!(got.data, 0x5a);
    }

    #[test]
    fn shared_scheme_is_memoized() {
        let a = shared_scheme(EccLevel::Dected, 8).unwrap();
        let b = shared_scheme(EccLevel::Dected, 8).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
