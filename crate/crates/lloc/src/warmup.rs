//! Exact solver for perfectly satisfiable instances.
//!
//! If some embedding satisfies every comparison, one can be found in
//! polynomial time: guess the leftmost point `p`, sort the rest by
//! their asserted distance from `p` (the comparator of a perfect
//! instance is a strict total order), and solve a linear feasibility
//! problem over the consecutive gaps of that ordering. [`solve_zero`]
//! runs this for every pivot and accepts the first success, so it
//! returns an embedding if and only if a zero-violation embedding
//! exists.
//!
//! Strict inequalities are normalized to "slack ≥ 1": every row is a
//! difference of two gap sums, so the system is homogeneous and any
//! strictly feasible point can be scaled until each slack reaches 1.
//! The same scaling argument lets the solver substitute `d = e + 1`
//! with `e ≥ 0`, which both enforces positive gaps and hands most rows
//! a trivial initial basis.
//!
//! Every embedding this module returns has been re-checked with
//! [`Instance::violated_count`]; the LP layer is allowed to run in
//! floating point first and fall back to exact rationals only when a
//! verdict cannot be certified.

use num::BigRational;
use thiserror::Error;

use crate::instance::{Embedding, Instance};
use crate::simplex::{LpOutcome, LpProblem, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WarmupError {
    /// The pivot's comparisons are not a strict total order, so no
    /// embedding makes this pivot leftmost.
    #[error("pivot comparisons do not form a strict total order")]
    InconsistentComparator,
    /// The floating-point LP could not certify a verdict; retry in
    /// rational mode.
    #[error("floating-point LP could not certify a verdict")]
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no zero-violation embedding exists")]
pub struct NoPerfectEmbedding;

/// Arithmetic used by [`lp_feasible_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpMode {
    /// Fast f64 solve; results are certified only through verification.
    Float,
    /// Exact rational arithmetic end to end.
    Rational,
}

/// One comparison translated to gap sums: the asserted-closer distance
/// plus one must not exceed the asserted-farther distance.
///
/// Intervals are `[lo, hi)` ranges over gap indices (gap `t` separates
/// ordering positions `t` and `t + 1`), with `lo ≤ hi ≤ gap count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapRow {
    pub closer: (usize, usize),
    pub farther: (usize, usize),
}

/// All comparisons of an instance rewritten over the consecutive gaps
/// of one candidate ordering.
#[derive(Debug, Clone)]
pub struct GapSystem {
    pub ordering: Vec<usize>,
    pub rows: Vec<GapRow>,
}

impl GapSystem {
    pub fn gap_count(&self) -> usize {
        self.ordering.len().saturating_sub(1)
    }
}

/// Feasibility verdict for a gap system.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// Verified gap values; every row holds with the required slack.
    Feasible(Vec<f64>),
    /// `certified` is true when the verdict is exact (a structural
    /// contradiction or a rational-mode LP), false when a floating
    /// solve concluded infeasibility that rounding could explain.
    Infeasible { certified: bool },
}

/// Sorts the non-pivot points by their asserted distance from `p` and
/// verifies with all `O(n²)` comparisons that the result is consistent.
/// Returns `p` followed by the sorted points.
pub fn order_by_pivot(inst: &Instance, p: usize) -> Result<Vec<usize>, WarmupError> {
    let n = inst.n();
    assert!(p < n, "pivot out of range");
    // Insertion sort: a library sort may not be called with an
    // inconsistent comparator, and corrupted instances produce exactly
    // those.
    let mut sorted: Vec<usize> = Vec::with_capacity(n - 1);
    for q in (0..n).filter(|&q| q != p) {
        let mut at = sorted.len();
        while at > 0 && inst.asserts(p, q, sorted[at - 1]) {
            at -= 1;
        }
        sorted.insert(at, q);
    }
    for i in 0..sorted.len() {
        for j in (i + 1)..sorted.len() {
            if !inst.asserts(p, sorted[i], sorted[j]) {
                return Err(WarmupError::InconsistentComparator);
            }
        }
    }
    let mut ordering = Vec::with_capacity(n);
    ordering.push(p);
    ordering.extend(sorted);
    Ok(ordering)
}

/// Translates every comparison into a [`GapRow`] over the given
/// ordering. Distances are contiguous gap sums regardless of which
/// side of the pivot a point falls on.
pub fn build_gap_system(inst: &Instance, ordering: &[usize]) -> GapSystem {
    let n = inst.n();
    assert_eq!(ordering.len(), n, "ordering must cover all points");
    let mut pos = vec![usize::MAX; n];
    for (i, &pt) in ordering.iter().enumerate() {
        assert!(pt < n && pos[pt] == usize::MAX, "ordering must be a permutation");
        pos[pt] = i;
    }
    let span = |a: usize, b: usize| -> (usize, usize) {
        if pos[a] < pos[b] {
            (pos[a], pos[b])
        } else {
            (pos[b], pos[a])
        }
    };
    let mut rows = Vec::with_capacity(n * inst.pairs_per_pivot());
    for u in 0..n {
        for v in 0..n {
            if v == u {
                continue;
            }
            for w in (v + 1)..n {
                if w == u {
                    continue;
                }
                let c = inst.closer(u, v, w);
                let f = if c == v { w } else { v };
                rows.push(GapRow { closer: span(u, c), farther: span(u, f) });
            }
        }
    }
    GapSystem { ordering: ordering.to_vec(), rows }
}

/// A row of the reduced LP in shifted variables `e = d - 1 ≥ 0`.
struct ReducedRow {
    coeffs: Vec<i64>,
    rhs: i64,
}

fn contains(outer: (usize, usize), inner: (usize, usize)) -> bool {
    inner.0 >= inner.1 || (outer.0 <= inner.0 && inner.1 <= outer.1)
}

/// Screens and prunes the system down to the rows the LP actually
/// needs. Returns `None` on a structural contradiction (a row whose
/// farther interval lies inside its closer interval can never reach
/// slack 1 with nonnegative gaps).
///
/// Rows whose closer interval nests inside the farther one are implied
/// by `d ≥ 1` and dropped. The remaining rows compare the two sides of
/// one pivot position; within each (pivot, closer side) family a row is
/// implied by any row with a weakly longer closer interval and weakly
/// shorter farther interval, so only the Pareto frontier survives.
fn reduce(sys: &GapSystem) -> Option<Vec<ReducedRow>> {
    let g = sys.gap_count();
    // (pivot position, right-side-closer, left endpoint, right endpoint)
    let mut cross: Vec<(usize, bool, usize, usize)> = Vec::new();
    let mut odd: Vec<&GapRow> = Vec::new();
    for row in &sys.rows {
        let (c, f) = (row.closer, row.farther);
        if contains(c, f) {
            return None;
        }
        if contains(f, c) {
            continue;
        }
        if c.1 == f.0 {
            cross.push((c.1, false, c.0, f.1));
        } else if f.1 == c.0 {
            cross.push((c.0, true, f.0, c.1));
        } else {
            // Hand-built systems may hold arbitrary interval pairs;
            // instance-derived rows never land here.
            odd.push(row);
        }
    }
    cross.sort_unstable();
    cross.dedup();
    let mut rows: Vec<ReducedRow> = Vec::new();
    let mut emit = |pivot: usize, right_closer: bool, alpha: usize, gamma: usize| {
        let mut coeffs = vec![0i64; g];
        let sign = if right_closer { 1 } else { -1 };
        for t in alpha..pivot {
            coeffs[t] += sign;
        }
        for t in pivot..gamma {
            coeffs[t] -= sign;
        }
        let left = (pivot - alpha) as i64;
        let right = (gamma - pivot) as i64;
        let rhs = if right_closer { 1 - left + right } else { 1 - right + left };
        rows.push(ReducedRow { coeffs, rhs });
    };
    let mut i = 0;
    while i < cross.len() {
        let (pivot, fam) = (cross[i].0, cross[i].1);
        let mut j = i;
        while j < cross.len() && cross[j].0 == pivot && cross[j].1 == fam {
            j += 1;
        }
        let group = &cross[i..j];
        if fam {
            // Right point asserted closer: hardest rows have the
            // largest endpoints on both sides.
            let mut best = 0usize;
            for k in (0..group.len()).rev() {
                let (_, _, alpha, gamma) = group[k];
                if k + 1 < group.len() && group[k + 1].2 == alpha {
                    continue; // same alpha, smaller gamma: dominated
                }
                if gamma > best {
                    emit(pivot, true, alpha, gamma);
                    best = gamma;
                }
            }
        } else {
            // Left point asserted closer: hardest rows have the
            // smallest endpoints on both sides.
            let mut best = usize::MAX;
            for k in 0..group.len() {
                let (_, _, alpha, gamma) = group[k];
                if k > 0 && group[k - 1].2 == alpha {
                    continue; // same alpha, larger gamma: dominated
                }
                if gamma < best {
                    emit(pivot, false, alpha, gamma);
                    best = gamma;
                }
            }
        }
        i = j;
    }
    for row in odd {
        let mut coeffs = vec![0i64; g];
        for t in row.farther.0..row.farther.1 {
            coeffs[t] += 1;
        }
        for t in row.closer.0..row.closer.1 {
            coeffs[t] -= 1;
        }
        let f_len = (row.farther.1 - row.farther.0) as i64;
        let c_len = (row.closer.1 - row.closer.0) as i64;
        rows.push(ReducedRow { coeffs, rhs: 1 - f_len + c_len });
    }
    Some(rows)
}

fn run_lp<S: Scalar>(g: usize, rows: &[ReducedRow], cap: usize) -> LpOutcome<S> {
    let mut lp = LpProblem::new(g);
    for r in rows {
        let coeffs = r.coeffs.iter().map(|&v| S::from_int(v)).collect();
        lp.add_ge(coeffs, S::from_int(r.rhs));
    }
    lp.solve(cap)
}

/// Checks every original row at the candidate gaps: each margin
/// (farther sum minus closer sum) must be at least `threshold`.
fn margins_hold<S: Scalar>(sys: &GapSystem, d: &[S], threshold: &S) -> bool {
    let mut pos = Vec::with_capacity(d.len() + 1);
    pos.push(S::zero());
    for x in d {
        let last = pos.last().unwrap().clone();
        pos.push(last.add(x));
    }
    sys.rows.iter().all(|row| {
        let far = pos[row.farther.1].sub(&pos[row.farther.0]);
        let close = pos[row.closer.1].sub(&pos[row.closer.0]);
        // `>=` fails NaN margins, sending the pivot to the exact retry.
        far.sub(&close) >= *threshold
    })
}

/// Decides feasibility in floating point; see [`lp_feasible_with`].
pub fn lp_feasible(sys: &GapSystem) -> Result<Feasibility, WarmupError> {
    lp_feasible_with(sys, LpMode::Float)
}

/// Decides whether any nonnegative gap assignment gives every row at
/// least unit slack. A returned `Feasible` has been verified against
/// every row of the input system — with exact arithmetic in rational
/// mode, with residual slack ≥ 0.5 in float mode (callers then confirm
/// through `violated_count` on the reconstructed embedding).
pub fn lp_feasible_with(sys: &GapSystem, mode: LpMode) -> Result<Feasibility, WarmupError> {
    let g = sys.gap_count();
    let Some(rows) = reduce(sys) else {
        return Ok(Feasibility::Infeasible { certified: true });
    };
    match mode {
        LpMode::Float => match run_lp::<f64>(g, &rows, 100_000) {
            LpOutcome::Optimal { solution, .. } => {
                let d: Vec<f64> = solution.iter().map(|e| e + 1.0).collect();
                if margins_hold(sys, &d, &0.5) {
                    Ok(Feasibility::Feasible(d))
                } else {
                    Err(WarmupError::NumericalFailure)
                }
            }
            LpOutcome::Infeasible => Ok(Feasibility::Infeasible { certified: false }),
            LpOutcome::Unbounded | LpOutcome::IterationLimit => {
                Err(WarmupError::NumericalFailure)
            }
        },
        LpMode::Rational => match run_lp::<BigRational>(g, &rows, 1_000_000) {
            LpOutcome::Optimal { solution, .. } => {
                let one = <BigRational as Scalar>::one();
                let d: Vec<BigRational> = solution.iter().map(|e| e.add(&one)).collect();
                if margins_hold(sys, &d, &one) {
                    Ok(Feasibility::Feasible(d.iter().map(Scalar::to_f64).collect()))
                } else {
                    Err(WarmupError::NumericalFailure)
                }
            }
            LpOutcome::Infeasible => Ok(Feasibility::Infeasible { certified: true }),
            LpOutcome::Unbounded | LpOutcome::IterationLimit => {
                Err(WarmupError::NumericalFailure)
            }
        },
    }
}

/// Places the ordering's points at the prefix sums of the gaps, first
/// point at zero.
pub fn embedding_from_gaps(ordering: &[usize], gaps: &[f64]) -> Embedding {
    assert_eq!(gaps.len() + 1, ordering.len(), "need one gap between consecutive points");
    let mut positions = vec![0.0; ordering.len()];
    let mut x = 0.0;
    for (i, &pt) in ordering.iter().enumerate() {
        positions[pt] = x;
        if i < gaps.len() {
            x += gaps[i];
        }
    }
    Embedding::new(positions)
}

/// Finds a zero-violation embedding or proves none exists.
///
/// Pivots are tried in increasing order: sort by the pivot, build the
/// gap system, decide feasibility in float mode, and return the first
/// reconstruction that verifies (`violated_count` must be zero — this
/// check is unconditional). Pivots whose float verdict could not be
/// certified are retried in rational mode before concluding that no
/// perfect embedding exists, so the final verdict is exact in both
/// directions.
pub fn solve_zero(inst: &Instance) -> Result<Embedding, NoPerfectEmbedding> {
    let mut retry = Vec::new();
    for p in 0..inst.n() {
        let Ok(ordering) = order_by_pivot(inst, p) else {
            continue;
        };
        let sys = build_gap_system(inst, &ordering);
        match lp_feasible_with(&sys, LpMode::Float) {
            Ok(Feasibility::Feasible(d)) => {
                let emb = embedding_from_gaps(&ordering, &d);
                if inst.violated_count(&emb).expect("lengths match") == 0 {
                    return Ok(emb);
                }
                retry.push(p);
            }
            Ok(Feasibility::Infeasible { certified: true }) => {}
            Ok(Feasibility::Infeasible { certified: false }) | Err(_) => retry.push(p),
        }
    }
    for p in retry {
        let Ok(ordering) = order_by_pivot(inst, p) else {
            continue;
        };
        let sys = build_gap_system(inst, &ordering);
        if let Ok(Feasibility::Feasible(d)) = lp_feasible_with(&sys, LpMode::Rational) {
            let emb = embedding_from_gaps(&ordering, &d);
            if inst.violated_count(&emb).expect("lengths match") == 0 {
                return Ok(emb);
            }
        }
    }
    Err(NoPerfectEmbedding)
}
