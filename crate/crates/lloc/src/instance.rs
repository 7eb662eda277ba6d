//! Dense ordinal-comparison instances and line embeddings.
//!
//! An [`Instance`] stores one orientation bit per `(pivot, pair)` slot:
//! for pivot `u` and unordered pair `{v, w}` (`v < w`, both distinct from
//! `u`), the bit records whether the instance asserts "`v` is closer to
//! `u` than `w`" or the reverse. With `n` points there are
//! `n * C(n-1, 2)` comparisons; at `n = 300` the bitmap is about 1.6 MB.
//!
//! An [`Embedding`] assigns each point a coordinate on the real line.
//! A comparison `(u, v, w)` is satisfied by an embedding exactly when
//! `|f(u) - f(v)| < |f(u) - f(w)|` holds strictly; equal distances count
//! as violations everywhere in this crate.

use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::rng;

/// Smallest point count for which a comparison exists.
pub const MIN_POINTS: usize = 3;

/// Errors from instance construction and evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    /// Two candidate points are exactly equidistant from a pivot and the
    /// tie rule forbids resolving the tie.
    #[error("points {a} and {b} are equidistant from pivot {pivot}")]
    TieEncountered { pivot: usize, a: usize, b: usize },
    /// A position was NaN or infinite.
    #[error("position of point {index} is not finite")]
    NonFiniteInput { index: usize },
    /// An embedding's length does not match the instance.
    #[error("embedding has {got} positions, instance has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    /// A point id outside `0..n`.
    #[error("point index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    /// Fewer than [`MIN_POINTS`] points.
    #[error("instances need at least {MIN_POINTS} points, got {n}")]
    TooFewPoints { n: usize },
    /// Corruption fraction outside `[0, 1]`.
    #[error("corruption fraction {fraction} is not in [0, 1]")]
    InvalidFraction { fraction: f64 },
}

/// Errors from the text formats.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    /// Magic line or `n=` line is missing or malformed.
    #[error("malformed header")]
    MalformedHeader,
    /// A record is missing, truncated, or padded with nonzero bits.
    #[error("record length mismatch on line {line}")]
    BadLength { line: usize },
    /// A character that is not a hexadecimal digit.
    #[error("bad hex digit on line {line}")]
    BadHexDigit { line: usize },
    /// An embedding line that is not `index position`.
    #[error("bad embedding record on line {line}")]
    BadRecord { line: usize },
    /// Embedding indices are not exactly `0..n` once each.
    #[error("embedding indices are not 0..n exactly once")]
    IndexSetMismatch,
}

/// How [`Instance::from_embedding`] treats exactly equidistant pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRule {
    /// Fail with [`InstanceError::TieEncountered`].
    Reject,
    /// Assert that the lower-indexed point of the pair is closer.
    LowerIndexCloser,
}

/// Parameters for [`Instance::corrupt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    /// Fraction of comparison slots to flip, in `[0, 1]`.
    pub fraction: f64,
    /// Seed for the flip-set draw.
    pub seed: u64,
}

/// A dense set of ordinal comparisons over `n` points.
#[derive(Clone, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    /// One bit per `(pivot, pair)` slot, pivot-major, pairs in
    /// lexicographic order; set bit = the smaller-labelled point of the
    /// pair is asserted closer.
    bits: Vec<u64>,
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Instance").field("n", &self.n).finish()
    }
}

/// Number of unordered pairs over `m` items.
pub(crate) fn pairs(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Lexicographic rank of the pair `(a, b)` (`a < b < m`).
pub(crate) fn pair_rank(m: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < m);
    a * m - a * (a + 1) / 2 + (b - a - 1)
}

/// Start offsets of each first-element row in pair-rank order; used to
/// invert [`pair_rank`] by binary search.
pub(crate) fn pair_row_starts(m: usize) -> Vec<usize> {
    (0..m).map(|a| a * m - a * (a + 1) / 2).collect()
}

/// Inverse of [`pair_rank`] given precomputed row starts.
pub(crate) fn pair_unrank(row_starts: &[usize], rank: usize) -> (usize, usize) {
    let a = row_starts.partition_point(|&s| s <= rank) - 1;
    let b = rank - row_starts[a] + a + 1;
    (a, b)
}

impl Instance {
    fn with_zero_bits(n: usize) -> Result<Self, InstanceError> {
        if n < MIN_POINTS {
            return Err(InstanceError::TooFewPoints { n });
        }
        let total = n * pairs(n - 1);
        Ok(Instance { n, bits: vec![0u64; total.div_ceil(64)] })
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Comparison slots per pivot: `C(n-1, 2)`.
    pub fn pairs_per_pivot(&self) -> usize {
        pairs(self.n - 1)
    }

    /// Total number of comparisons: `n * C(n-1, 2)`.
    pub fn total_constraints(&self) -> u64 {
        (self.n as u64) * (self.pairs_per_pivot() as u64)
    }

    /// Maps a point label to its index among `[n] \ {pivot}`.
    fn local(&self, pivot: usize, point: usize) -> usize {
        if point < pivot {
            point
        } else {
            point - 1
        }
    }

    fn slot(&self, pivot: usize, a: usize, b: usize) -> usize {
        debug_assert!(pivot < self.n && a < b && b < self.n);
        debug_assert!(a != pivot && b != pivot);
        let rank = pair_rank(self.n - 1, self.local(pivot, a), self.local(pivot, b));
        pivot * self.pairs_per_pivot() + rank
    }

    fn get_bit(&self, idx: usize) -> bool {
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    fn set_bit(&mut self, idx: usize, value: bool) {
        let mask = 1u64 << (idx % 64);
        if value {
            self.bits[idx / 64] |= mask;
        } else {
            self.bits[idx / 64] &= !mask;
        }
    }

    /// The point of `{a, b}` asserted closer to `pivot`. Order of `a`
    /// and `b` does not matter.
    pub fn closer(&self, pivot: usize, a: usize, b: usize) -> usize {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if self.get_bit(self.slot(pivot, lo, hi)) {
            lo
        } else {
            hi
        }
    }

    /// Whether the instance asserts "`v` is closer to `u` than `w`".
    pub fn asserts(&self, u: usize, v: usize, w: usize) -> bool {
        self.closer(u, v, w) == v
    }

    /// Toggles the orientation of one comparison slot.
    pub fn flip_comparison(&mut self, pivot: usize, a: usize, b: usize) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let idx = self.slot(pivot, lo, hi);
        let cur = self.get_bit(idx);
        self.set_bit(idx, !cur);
    }

    /// Number of comparison slots on which two instances disagree.
    ///
    /// Panics if the instances have different point counts.
    pub fn hamming_distance(&self, other: &Instance) -> u64 {
        assert_eq!(self.n, other.n, "instances must have equal point counts");
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum()
    }

    /// Derives the instance induced by positions on the line.
    ///
    /// For every pivot and pair the closer point is recorded; exact
    /// distance ties are resolved by the tie rule.
    pub fn from_embedding(emb: &Embedding, rule: TieRule) -> Result<Self, InstanceError> {
        let x = emb.positions();
        let n = x.len();
        for (index, &p) in x.iter().enumerate() {
            if !p.is_finite() {
                return Err(InstanceError::NonFiniteInput { index });
            }
        }
        let mut inst = Instance::with_zero_bits(n)?;
        for u in 0..n {
            for a in 0..n {
                if a == u {
                    continue;
                }
                for b in (a + 1)..n {
                    if b == u {
                        continue;
                    }
                    let da = (x[u] - x[a]).abs();
                    let db = (x[u] - x[b]).abs();
                    let a_closer = if da < db {
                        true
                    } else if db < da {
                        false
                    } else {
                        match rule {
                            TieRule::Reject => {
                                return Err(InstanceError::TieEncountered { pivot: u, a, b })
                            }
                            TieRule::LowerIndexCloser => true,
                        }
                    };
                    let idx = inst.slot(u, a, b);
                    inst.set_bit(idx, a_closer);
                }
            }
        }
        Ok(inst)
    }

    /// Flips exactly `⌊fraction * N⌋` distinct comparison slots, where
    /// `N` is the total comparison count, chosen uniformly without
    /// replacement from the seeded stream.
    pub fn corrupt(&self, spec: CorruptionSpec) -> Result<Instance, InstanceError> {
        if !(0.0..=1.0).contains(&spec.fraction) {
            return Err(InstanceError::InvalidFraction { fraction: spec.fraction });
        }
        let total = self.n * self.pairs_per_pivot();
        let flips = (spec.fraction * total as f64).floor() as usize;
        let mut out = self.clone();
        let mut rng = rng::stream(spec.seed);
        for idx in sample(&mut rng, total, flips) {
            let cur = out.get_bit(idx);
            out.set_bit(idx, !cur);
        }
        Ok(out)
    }

    fn violated_for_pivot(&self, x: &[f64], u: usize) -> u64 {
        let n = self.n;
        let base = u * self.pairs_per_pivot();
        let mut violated = 0u64;
        let mut rank = 0usize;
        for ia in 0..(n - 1) {
            let a = if ia < u { ia } else { ia + 1 };
            let da = (x[u] - x[a]).abs();
            for ib in (ia + 1)..(n - 1) {
                let b = if ib < u { ib } else { ib + 1 };
                let db = (x[u] - x[b]).abs();
                let a_asserted = self.get_bit(base + rank);
                let satisfied = if a_asserted { da < db } else { db < da };
                violated += u64::from(!satisfied);
                rank += 1;
            }
        }
        violated
    }

    /// Exact number of comparisons the embedding violates. Ties violate.
    pub fn violated_count(&self, emb: &Embedding) -> Result<u64, InstanceError> {
        let x = emb.positions();
        if x.len() != self.n {
            return Err(InstanceError::LengthMismatch { expected: self.n, got: x.len() });
        }
        Ok(crate::exec::sum_indexed(self.n, |u| self.violated_for_pivot(x, u)))
    }

    /// Monte Carlo estimate of the violated fraction: `samples` slots are
    /// drawn uniformly with replacement from the seeded stream.
    pub fn violated_estimate(
        &self,
        emb: &Embedding,
        samples: u64,
        seed: u64,
    ) -> Result<f64, InstanceError> {
        let x = emb.positions();
        if x.len() != self.n {
            return Err(InstanceError::LengthMismatch { expected: self.n, got: x.len() });
        }
        assert!(samples > 0, "sample count must be positive");
        let ppp = self.pairs_per_pivot() as u64;
        let total = self.n as u64 * ppp;
        let row_starts = pair_row_starts(self.n - 1);
        let mut rng = rng::stream(seed);
        let mut violated = 0u64;
        for _ in 0..samples {
            let slot = rng.gen_range(0..total);
            let u = (slot / ppp) as usize;
            let (ia, ib) = pair_unrank(&row_starts, (slot % ppp) as usize);
            let a = if ia < u { ia } else { ia + 1 };
            let b = if ib < u { ib } else { ib + 1 };
            let da = (x[u] - x[a]).abs();
            let db = (x[u] - x[b]).abs();
            let satisfied = if self.get_bit(slot as usize) { da < db } else { db < da };
            violated += u64::from(!satisfied);
        }
        Ok(violated as f64 / samples as f64)
    }

    /// Fraction of pivot `i`'s comparisons the embedding satisfies.
    pub fn pivot_goodness(&self, emb: &Embedding, i: usize) -> Result<f64, InstanceError> {
        if i >= self.n {
            return Err(InstanceError::IndexOutOfRange { index: i, n: self.n });
        }
        let x = emb.positions();
        if x.len() != self.n {
            return Err(InstanceError::LengthMismatch { expected: self.n, got: x.len() });
        }
        let violated = self.violated_for_pivot(x, i);
        let per = self.pairs_per_pivot() as u64;
        Ok((per - violated) as f64 / per as f64)
    }

    /// Serializes to the `LLOC 1` text format.
    ///
    /// Layout: header `LLOC 1`, then `n=<N>`, then one record `u:<hex>`
    /// per pivot in increasing order. Each record packs that pivot's
    /// `C(n-1, 2)` orientation bits in lexicographic pair order,
    /// most-significant-bit first within each hex digit, zero-padded at
    /// the end to a whole digit.
    pub fn to_text(&self) -> String {
        let ppp = self.pairs_per_pivot();
        let digits = ppp.div_ceil(4);
        let mut out = String::with_capacity(16 + self.n * (digits + 8));
        out.push_str("LLOC 1\n");
        out.push_str(&format!("n={}\n", self.n));
        for u in 0..self.n {
            out.push_str(&format!("{u}:"));
            let base = u * ppp;
            for d in 0..digits {
                let mut digit = 0u32;
                for k in 0..4 {
                    let local = d * 4 + k;
                    if local < ppp && self.get_bit(base + local) {
                        digit |= 1 << (3 - k);
                    }
                }
                out.push(char::from_digit(digit, 16).unwrap());
            }
            out.push('\n');
        }
        out
    }

    /// Parses the `LLOC 1` text format. Strict: record count, record
    /// length, and zero padding are all enforced.
    pub fn parse_text(text: &str) -> Result<Instance, ParseError> {
        let mut lines = text.lines();
        if lines.next() != Some("LLOC 1") {
            return Err(ParseError::MalformedHeader);
        }
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("n="))
            .and_then(|v| v.parse().ok())
            .ok_or(ParseError::MalformedHeader)?;
        if n < MIN_POINTS {
            return Err(ParseError::MalformedHeader);
        }
        let mut inst = Instance::with_zero_bits(n).expect("n checked above");
        let ppp = inst.pairs_per_pivot();
        let digits = ppp.div_ceil(4);
        for u in 0..n {
            // Header occupies lines 1-2, records start on line 3.
            let line_no = u + 3;
            let line = lines.next().ok_or(ParseError::BadLength { line: line_no })?;
            let hex = line
                .strip_prefix(&format!("{u}:"))
                .ok_or(ParseError::MalformedHeader)?;
            if hex.len() != digits {
                return Err(ParseError::BadLength { line: line_no });
            }
            let base = u * ppp;
            for (d, ch) in hex.chars().enumerate() {
                let digit = ch.to_digit(16).ok_or(ParseError::BadHexDigit { line: line_no })?;
                for k in 0..4 {
                    let bit = digit >> (3 - k) & 1 == 1;
                    let local = d * 4 + k;
                    if local < ppp {
                        inst.set_bit(base + local, bit);
                    } else if bit {
                        // Padding bits past the last pair must be zero.
                        return Err(ParseError::BadLength { line: line_no });
                    }
                }
            }
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(ParseError::BadLength { line: n + 4 });
        }
        Ok(inst)
    }
}

/// Positions of the points on the real line, indexed by point id.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    positions: Vec<f64>,
}

impl Embedding {
    pub fn new(positions: Vec<f64>) -> Self {
        Embedding { positions }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Serializes as one `index position` pair per line. Positions use
    /// the shortest decimal form that round-trips.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.positions.iter().enumerate() {
            out.push_str(&format!("{i} {p}\n"));
        }
        out
    }

    /// Parses the `index position` format; indices must cover `0..n`
    /// exactly once, in any order.
    pub fn parse_text(text: &str) -> Result<Embedding, ParseError> {
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = lineno + 1;
            let mut parts = line.split_whitespace();
            let idx: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(ParseError::BadRecord { line: line_no })?;
            let pos: f64 = parts
                .next()
                .and_then(|t| t.parse().ok())
                .filter(|p: &f64| p.is_finite())
                .ok_or(ParseError::BadRecord { line: line_no })?;
            if parts.next().is_some() {
                return Err(ParseError::BadRecord { line: line_no });
            }
            records.push((idx, pos));
        }
        let n = records.len();
        let mut positions = vec![f64::NAN; n];
        let mut seen = vec![false; n];
        for (idx, pos) in records {
            if idx >= n || seen[idx] {
                return Err(ParseError::IndexSetMismatch);
            }
            seen[idx] = true;
            positions[idx] = pos;
        }
        Ok(Embedding { positions })
    }
}

impl From<Vec<f64>> for Embedding {
    fn from(positions: Vec<f64>) -> Self {
        Embedding::new(positions)
    }
}

impl std::ops::Index<usize> for Embedding {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.positions[i]
    }
}

/// The two-scale family: `k + 1` points on an even grid `0, 2, …, 2k`
/// followed by `k` points on the unit grid `2k+1, …, 3k`. Equidistant
/// pairs are common here, so comparisons are derived with the
/// lower-index-closer rule. Requires `k ≥ 2`.
pub fn mixed_gap_instance(k: usize) -> Instance {
    assert!(k >= 2, "mixed-gap family needs k >= 2");
    let mut xs: Vec<f64> = (0..=k).map(|i| (2 * i) as f64).collect();
    xs.extend((2 * k + 1..=3 * k).map(|v| v as f64));
    Instance::from_embedding(&Embedding::new(xs), TieRule::LowerIndexCloser)
        .expect("integer grid positions are finite")
}

/// Ground-truth positions for [`mixed_gap_instance`].
pub fn mixed_gap_positions(k: usize) -> Embedding {
    assert!(k >= 2, "mixed-gap family needs k >= 2");
    let mut xs: Vec<f64> = (0..=k).map(|i| (2 * i) as f64).collect();
    xs.extend((2 * k + 1..=3 * k).map(|v| v as f64));
    Embedding::new(xs)
}

/// Instance planted from `n` positions drawn uniformly in `[0, 1)`.
pub fn planted_uniform(n: usize, seed: u64) -> Result<(Instance, Embedding), InstanceError> {
    let mut rng = rng::stream(seed);
    let emb = Embedding::new((0..n).map(|_| rng.gen::<f64>()).collect());
    let inst = Instance::from_embedding(&emb, TieRule::Reject)?;
    Ok((inst, emb))
}

/// Instance planted from clustered positions: `clusters` centers drawn
/// uniformly in `[0, 1)`, point `i` assigned to cluster `i % clusters`
/// at `center ± spread`.
pub fn planted_clustered(
    n: usize,
    clusters: usize,
    spread: f64,
    seed: u64,
) -> Result<(Instance, Embedding), InstanceError> {
    assert!(clusters >= 1 && clusters <= n, "cluster count must be in 1..=n");
    let mut rng = rng::stream(seed);
    let centers: Vec<f64> = (0..clusters).map(|_| rng.gen::<f64>()).collect();
    let emb = Embedding::new(
        (0..n)
            .map(|i| centers[i % clusters] + rng.gen_range(-spread..=spread))
            .collect(),
    );
    let inst = Instance::from_embedding(&emb, TieRule::Reject)?;
    Ok((inst, emb))
}

/// Bucket-aligned planted geometry: `b` clusters at unit-spaced centers
/// `0, 1, …, b-1`, points assigned to clusters in contiguous index
/// blocks (balanced, larger blocks first), each point at
/// `center ± spread`. With `spread < 0.25` every within-cluster distance
/// is smaller than every between-cluster distance.
pub fn planted_aligned(
    n: usize,
    b: usize,
    spread: f64,
    seed: u64,
) -> Result<(Instance, Embedding), InstanceError> {
    assert!(b >= 1 && b <= n, "cluster count must be in 1..=n");
    assert!((0.0..0.25).contains(&spread), "spread must be in [0, 0.25)");
    let mut rng = rng::stream(seed);
    let base = n / b;
    let extra = n % b;
    let mut positions = Vec::with_capacity(n);
    for j in 0..b {
        let size = base + usize::from(j < extra);
        for _ in 0..size {
            positions.push(j as f64 + rng.gen_range(-spread..=spread));
        }
    }
    let emb = Embedding::new(positions);
    let inst = Instance::from_embedding(&emb, TieRule::Reject)?;
    Ok((inst, emb))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tee() -> Instance {
        // Positions (0, 1, 3): the canonical three-point example.
        Instance::from_embedding(&Embedding::new(vec![0.0, 1.0, 3.0]), TieRule::Reject).unwrap()
    }

    #[test]
    fn three_point_example_asserts_expected_triples() {
        let inst = tee();
        assert!(inst.asserts(0, 1, 2));
        assert!(inst.asserts(1, 0, 2));
        assert!(inst.asserts(2, 1, 0));
        assert!(!inst.asserts(0, 2, 1));
        assert!(!inst.asserts(1, 2, 0));
        assert!(!inst.asserts(2, 0, 1));
        assert_eq!(inst.total_constraints(), 3);
    }

    #[test]
    fn reject_rule_reports_tie_pivot() {
        let err = Instance::from_embedding(&Embedding::new(vec![0.0, 1.0, 2.0]), TieRule::Reject)
            .unwrap_err();
        assert_eq!(err, InstanceError::TieEncountered { pivot: 1, a: 0, b: 2 });
    }

    #[test]
    fn lower_index_rule_resolves_ties() {
        let inst =
            Instance::from_embedding(&Embedding::new(vec![0.0, 1.0, 2.0]), TieRule::LowerIndexCloser)
                .unwrap();
        // Pivot 1 is equidistant from 0 and 2; the rule picks 0.
        assert!(inst.asserts(1, 0, 2));
    }

    #[test]
    fn non_finite_positions_are_rejected() {
        let err = Instance::from_embedding(
            &Embedding::new(vec![0.0, f64::NAN, 1.0]),
            TieRule::Reject,
        )
        .unwrap_err();
        assert_eq!(err, InstanceError::NonFiniteInput { index: 1 });
    }

    #[test]
    fn violated_count_matches_hand_examples() {
        let inst = tee();
        let zero = inst.violated_count(&Embedding::new(vec![0.0, 1.0, 3.0])).unwrap();
        assert_eq!(zero, 0);
        // (0, 2, 3) breaks only the pivot-1 comparison: |2-0| < |2-3| is false.
        let one = inst.violated_count(&Embedding::new(vec![0.0, 2.0, 3.0])).unwrap();
        assert_eq!(one, 1);
        // All points coincident: every comparison is a tie, so all violate.
        let all = inst.violated_count(&Embedding::new(vec![0.0, 0.0, 0.0])).unwrap();
        assert_eq!(all, 3);
    }

    #[test]
    fn violated_count_checks_length() {
        let inst = tee();
        let err = inst.violated_count(&Embedding::new(vec![0.0, 1.0])).unwrap_err();
        assert_eq!(err, InstanceError::LengthMismatch { expected: 3, got: 2 });
    }

    #[test]
    fn estimate_is_exact_on_degenerate_embedding() {
        let inst = tee();
        let est = inst
            .violated_estimate(&Embedding::new(vec![0.0, 0.0, 0.0]), 1000, 9)
            .unwrap();
        assert_eq!(est, 1.0);
    }

    #[test]
    fn estimate_tracks_exact_fraction_across_seeds() {
        let (inst, emb) = planted_uniform(30, 41).unwrap();
        let inst = inst.corrupt(CorruptionSpec { fraction: 0.1, seed: 5 }).unwrap();
        let exact =
            inst.violated_count(&emb).unwrap() as f64 / inst.total_constraints() as f64;
        let mut hits = 0;
        for seed in 0..100 {
            let est = inst.violated_estimate(&emb, 10_000, seed).unwrap();
            if (est - exact).abs() <= 0.02 {
                hits += 1;
            }
        }
        assert!(hits >= 95, "only {hits}/100 estimates within ±0.02 of {exact}");
    }

    #[test]
    fn goodness_is_satisfied_fraction_per_pivot() {
        let inst = tee();
        let emb = Embedding::new(vec![0.0, 2.0, 3.0]);
        assert_eq!(inst.pivot_goodness(&emb, 0).unwrap(), 1.0);
        assert_eq!(inst.pivot_goodness(&emb, 1).unwrap(), 0.0);
        assert_eq!(inst.pivot_goodness(&emb, 2).unwrap(), 1.0);
        let err = inst.pivot_goodness(&emb, 3).unwrap_err();
        assert_eq!(err, InstanceError::IndexOutOfRange { index: 3, n: 3 });
    }

    #[test]
    fn goodness_double_counts_total() {
        // Sum over pivots of per-pivot satisfied counts equals the global
        // satisfied count: each comparison belongs to exactly one pivot.
        let (inst, _) = planted_uniform(12, 3).unwrap();
        let emb = Embedding::new((0..12).map(|i| (i * i) as f64).collect());
        let per = inst.pairs_per_pivot() as f64;
        let total: f64 = (0..12)
            .map(|i| inst.pivot_goodness(&emb, i).unwrap() * per)
            .sum();
        let satisfied =
            inst.total_constraints() - inst.violated_count(&emb).unwrap();
        assert!((total - satisfied as f64).abs() < 1e-6);
    }

    #[test]
    fn affine_maps_preserve_violations() {
        let (inst, emb) = planted_uniform(15, 8).unwrap();
        let base = inst.violated_count(&emb).unwrap();
        for &(a, c) in &[(2.0, 0.0), (0.5, -3.0), (10.0, 7.0)] {
            let mapped =
                Embedding::new(emb.positions().iter().map(|x| a * x + c).collect());
            assert_eq!(inst.violated_count(&mapped).unwrap(), base);
        }
    }

    #[test]
    fn corrupt_flips_exact_count() {
        let (inst, _) = planted_uniform(10, 1).unwrap();
        let total = inst.total_constraints();
        assert_eq!(total, 360);
        let corrupted = inst.corrupt(CorruptionSpec { fraction: 0.5, seed: 2 }).unwrap();
        assert_eq!(inst.hamming_distance(&corrupted), 180);
    }

    #[test]
    fn corrupt_zero_is_identity_and_full_double_flip_restores() {
        let (inst, _) = planted_uniform(8, 11).unwrap();
        let same = inst.corrupt(CorruptionSpec { fraction: 0.0, seed: 3 }).unwrap();
        assert_eq!(inst, same);
        let once = inst.corrupt(CorruptionSpec { fraction: 1.0, seed: 4 }).unwrap();
        let twice = once.corrupt(CorruptionSpec { fraction: 1.0, seed: 5 }).unwrap();
        assert_ne!(inst, once);
        assert_eq!(inst, twice);
    }

    #[test]
    fn corrupt_is_deterministic_per_seed() {
        let (inst, _) = planted_uniform(9, 21).unwrap();
        let a = inst.corrupt(CorruptionSpec { fraction: 0.3, seed: 77 }).unwrap();
        let b = inst.corrupt(CorruptionSpec { fraction: 0.3, seed: 77 }).unwrap();
        let c = inst.corrupt(CorruptionSpec { fraction: 0.3, seed: 78 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn corrupt_rejects_bad_fraction() {
        let (inst, _) = planted_uniform(5, 0).unwrap();
        assert!(matches!(
            inst.corrupt(CorruptionSpec { fraction: 1.5, seed: 0 }),
            Err(InstanceError::InvalidFraction { .. })
        ));
    }

    #[test]
    fn mixed_gap_small_case_matches_construction() {
        // k = 2: positions {0, 2, 4, 5, 6}, five points.
        let inst = mixed_gap_instance(2);
        assert_eq!(inst.n(), 5);
        let expected = Instance::from_embedding(
            &Embedding::new(vec![0.0, 2.0, 4.0, 5.0, 6.0]),
            TieRule::LowerIndexCloser,
        )
        .unwrap();
        assert_eq!(inst, expected);
    }

    #[test]
    fn mixed_gap_reproduces_from_its_own_positions() {
        for k in [2, 5, 8] {
            let inst = mixed_gap_instance(k);
            let emb = mixed_gap_positions(k);
            let again = Instance::from_embedding(&emb, TieRule::LowerIndexCloser).unwrap();
            assert_eq!(inst, again, "k = {k}");
        }
    }

    #[test]
    fn mixed_gap_punishes_equal_spacing_and_ties() {
        let k = 20;
        let inst = mixed_gap_instance(k);
        let n = 2 * k + 1;
        // Spacing the points equally by index ignores the two-scale
        // geometry entirely.
        let equal = Embedding::new((0..n).map(|i| i as f64).collect());
        assert_eq!(inst.violated_count(&equal).unwrap(), 1135);
        // The generating positions themselves violate exactly the tie
        // comparisons (ties always count as violations).
        let identity = mixed_gap_positions(k);
        assert_eq!(inst.violated_count(&identity).unwrap(), 325);
        assert_eq!(inst.total_constraints(), 31_980);
    }

    #[test]
    fn pair_rank_and_unrank_are_inverse() {
        for m in 2..12 {
            let starts = pair_row_starts(m);
            let mut rank = 0;
            for a in 0..m {
                for b in (a + 1)..m {
                    assert_eq!(pair_rank(m, a, b), rank);
                    assert_eq!(pair_unrank(&starts, rank), (a, b));
                    rank += 1;
                }
            }
            assert_eq!(rank, pairs(m));
        }
    }

    #[test]
    fn text_roundtrip_is_bit_exact() {
        for seed in 0..20 {
            let n = 3 + (seed as usize * 7) % 38;
            let (inst, _) = planted_uniform(n, seed).unwrap();
            let text = inst.to_text();
            let back = Instance::parse_text(&text).unwrap();
            assert_eq!(inst, back, "n = {n}");
        }
    }

    #[test]
    fn smallest_instance_serializes_to_single_digit_records() {
        let inst = tee();
        let text = inst.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "LLOC 1");
        assert_eq!(lines[1], "n=3");
        assert_eq!(lines.len(), 5);
        for (u, line) in lines[2..].iter().enumerate() {
            assert_eq!(line.len(), 2 + 1, "record {u} is `u:` plus one hex digit");
        }
    }

    #[test]
    fn parse_rejects_malformed_inputs() {
        let good = tee().to_text();
        assert_eq!(
            Instance::parse_text(&good.replace("LLOC 1", "LLOC 2")),
            Err(ParseError::MalformedHeader)
        );
        // Truncate the final record entirely.
        let mut lines: Vec<&str> = good.lines().collect();
        lines.pop();
        assert_eq!(
            Instance::parse_text(&lines.join("\n")),
            Err(ParseError::BadLength { line: 5 })
        );
        assert_eq!(
            Instance::parse_text(&good.replace("n=3", "n=two")),
            Err(ParseError::MalformedHeader)
        );
        // Replace the first record's digit with a non-hex character.
        let bad = good
            .lines()
            .enumerate()
            .map(|(i, l)| if i == 2 { "0:z".to_string() } else { l.to_string() })
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(Instance::parse_text(&bad), Err(ParseError::BadHexDigit { line: 3 }));
    }

    #[test]
    fn parse_rejects_nonzero_padding() {
        // n = 4 has C(3,2) = 3 bits per record: one hex digit with one
        // padding bit. Set that padding bit.
        let (inst, _) = planted_uniform(4, 2).unwrap();
        let text = inst.to_text();
        let tweaked: Vec<String> = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == 2 {
                    let (prefix, hex) = l.split_at(2);
                    let digit = u32::from_str_radix(hex, 16).unwrap() | 1;
                    format!("{prefix}{}", char::from_digit(digit, 16).unwrap())
                } else {
                    l.to_string()
                }
            })
            .collect();
        assert_eq!(
            Instance::parse_text(&tweaked.join("\n")),
            Err(ParseError::BadLength { line: 3 })
        );
    }

    #[test]
    fn embedding_text_roundtrip() {
        let emb = Embedding::new(vec![0.125, -3.5, 0.1, 7.25e-3]);
        let back = Embedding::parse_text(&emb.to_text()).unwrap();
        assert_eq!(emb, back);
    }

    #[test]
    fn embedding_parse_rejects_bad_records() {
        assert_eq!(
            Embedding::parse_text("0 1.0\n1 nope"),
            Err(ParseError::BadRecord { line: 2 })
        );
        assert_eq!(
            Embedding::parse_text("0 1.0\n0 2.0"),
            Err(ParseError::IndexSetMismatch)
        );
        assert_eq!(
            Embedding::parse_text("0 1.0\n2 2.0"),
            Err(ParseError::IndexSetMismatch)
        );
    }

    #[test]
    fn flip_comparison_toggles_one_slot() {
        let mut inst = tee();
        let before = inst.clone();
        inst.flip_comparison(0, 1, 2);
        assert_eq!(before.hamming_distance(&inst), 1);
        assert!(!inst.asserts(0, 1, 2));
        inst.flip_comparison(0, 2, 1);
        assert_eq!(before, inst);
    }

    #[test]
    fn planted_aligned_separates_clusters() {
        let (_, emb) = planted_aligned(60, 5, 0.05, 123).unwrap();
        let x = emb.positions();
        for j in 0..5 {
            for i in (j * 12)..(j * 12 + 12) {
                assert!((x[i] - j as f64).abs() <= 0.05);
            }
        }
    }
}
