//! Weighted cluster instances: retraction from point-level instances,
//! position evaluation, and exact / heuristic solvers over cluster
//! positions.
//!
//! A weighted instance over `b` clusters stores one integer weight per
//! ordered triple `(i, j, k)` of distinct cluster labels, the price of
//! placing cluster `j` at least as far from `i` as cluster `k`. The
//! exact solver enumerates every full-dimensional sign cell of the
//! induced hyperplane arrangement (see `arrangement`), so its minimum
//! is certified; the heuristic is a restarted exact coordinate descent
//! whose objective is piecewise constant per coordinate.

use num::BigRational;
use rand::Rng;
use thiserror::Error;

use crate::arrangement::{self, Arrangement};
use crate::exec;
use crate::instance::{pair_rank, pairs, Instance};
use crate::rng;
use crate::simplex::Scalar;

/// Largest cluster count `solve_exact` accepts without an explicit cap
/// override.
pub const DEFAULT_EXACT_CAP: usize = 5;

/// Absolute ceiling for exact enumeration regardless of the cap.
pub const MAX_EXACT_B: usize = arrangement::MAX_EXACT_B;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WllocError {
    #[error("{b} clusters exceed the exact solver cap of {cap}")]
    TooLarge { b: usize, cap: usize },
    #[error("expected {expected} positions, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid cluster partition: {0}")]
    InvalidPartition(String),
}

/// Which ordered-triple reading `retraction` uses when it counts a
/// source comparison into a weight slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RetractionConvention {
    /// `w(i, j, k)` counts comparisons whose asserted-closer point lies
    /// in cluster `j`; this is the reading under which `evaluate` on
    /// the retraction agrees with violation counts of cluster-constant
    /// embeddings.
    #[default]
    ConstraintAligned,
    /// Mirror image: `w(i, j, k)` counts comparisons whose farther
    /// point lies in cluster `j`.
    Transposed,
}

fn triple_index(b: usize, i: usize, j: usize, k: usize) -> usize {
    assert!(i < b && j < b && k < b, "cluster label out of range");
    assert!(i != j && j != k && i != k, "cluster labels must be distinct");
    let (lo, hi) = if j < k { (j, k) } else { (k, j) };
    let local = |p: usize| if p < i { p } else { p - 1 };
    let rank = pair_rank(b - 1, local(lo), local(hi));
    (i * pairs(b - 1) + rank) * 2 + usize::from(j > k)
}

/// Integer weights over ordered triples of distinct cluster labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WllocInstance {
    b: usize,
    weights: Vec<u64>,
}

impl WllocInstance {
    /// A zero-weight instance over `b ≥ 2` clusters.
    pub fn new(b: usize) -> Self {
        assert!(b >= 2, "need at least two clusters");
        WllocInstance { b, weights: vec![0; b * pairs(b - 1) * 2] }
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// The weight of the ordered triple `(i, j, k)`, read "`j` asserted
    /// closer to `i` than `k`". Labels must be distinct.
    pub fn weight(&self, i: usize, j: usize, k: usize) -> u64 {
        self.weights[triple_index(self.b, i, j, k)]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, k: usize, w: u64) {
        self.weights[triple_index(self.b, i, j, k)] = w;
    }

    pub fn add_weight(&mut self, i: usize, j: usize, k: usize, amount: u64) {
        self.weights[triple_index(self.b, i, j, k)] += amount;
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum()
    }

    /// Debug dump: header, then one `i j k w` line (1-based labels) per
    /// nonzero weight in lexicographic triple order.
    pub fn to_text(&self) -> String {
        let mut out = format!("WLLOC 1\nb={}\n", self.b);
        for i in 0..self.b {
            for j in (0..self.b).filter(|&j| j != i) {
                for k in (0..self.b).filter(|&k| k != i && k != j) {
                    let w = self.weight(i, j, k);
                    if w > 0 {
                        out.push_str(&format!("{} {} {} {}\n", i + 1, j + 1, k + 1, w));
                    }
                }
            }
        }
        out
    }
}

/// Collapses an instance onto a cluster partition, counting how many
/// source comparisons land on each ordered triple of distinct clusters.
/// Comparisons touching fewer than three clusters are dropped.
pub fn retraction(
    inst: &Instance,
    clusters: &[Vec<usize>],
) -> Result<WllocInstance, WllocError> {
    retraction_with(inst, clusters, RetractionConvention::default())
}

pub fn retraction_with(
    inst: &Instance,
    clusters: &[Vec<usize>],
    convention: RetractionConvention,
) -> Result<WllocInstance, WllocError> {
    let b = clusters.len();
    if b < 2 {
        return Err(WllocError::InvalidPartition(
            "need at least two clusters".into(),
        ));
    }
    let n = inst.n();
    let mut of = vec![usize::MAX; n];
    for (ci, cluster) in clusters.iter().enumerate() {
        if cluster.is_empty() {
            return Err(WllocError::InvalidPartition(format!("cluster {ci} is empty")));
        }
        for &p in cluster {
            if p >= n {
                return Err(WllocError::InvalidPartition(format!(
                    "point {p} out of range for {n} points"
                )));
            }
            if of[p] != usize::MAX {
                return Err(WllocError::InvalidPartition(format!(
                    "point {p} appears in two clusters"
                )));
            }
            of[p] = ci;
        }
    }
    if let Some(p) = of.iter().position(|&c| c == usize::MAX) {
        return Err(WllocError::InvalidPartition(format!("point {p} is unassigned")));
    }

    let size = b * pairs(b - 1) * 2;
    let partials: Vec<Vec<u64>> = exec::map_indexed(n, |u| {
        let mut acc = vec![0u64; size];
        let bi = of[u];
        for a in 0..n {
            if a == u {
                continue;
            }
            for c in (a + 1)..n {
                if c == u {
                    continue;
                }
                let closer = inst.closer(u, a, c);
                let farther = a + c - closer;
                let (bc, bf) = (of[closer], of[farther]);
                if bi != bc && bi != bf && bc != bf {
                    let (j, k) = match convention {
                        RetractionConvention::ConstraintAligned => (bc, bf),
                        RetractionConvention::Transposed => (bf, bc),
                    };
                    acc[triple_index(b, bi, j, k)] += 1;
                }
            }
        }
        acc
    });
    let mut weights = vec![0u64; size];
    for partial in partials {
        for (w, v) in weights.iter_mut().zip(partial) {
            *w += v;
        }
    }
    Ok(WllocInstance { b, weights })
}

/// Total weight of triples violated by the given cluster positions.
/// A triple `(i, j, k)` is violated unless `j` is strictly closer to
/// `i` than `k`; exact distance ties violate both orientations.
pub fn evaluate(w: &WllocInstance, positions: &[f64]) -> Result<u64, WllocError> {
    if positions.len() != w.b {
        return Err(WllocError::LengthMismatch { expected: w.b, got: positions.len() });
    }
    let x = positions;
    let mut total = 0u64;
    for i in 0..w.b {
        for j in (0..w.b).filter(|&j| j != i) {
            for k in (j + 1)..w.b {
                if k == i {
                    continue;
                }
                let dj = (x[i] - x[j]).abs();
                let dk = (x[i] - x[k]).abs();
                if dj >= dk {
                    total += w.weight(i, j, k);
                }
                if dk >= dj {
                    total += w.weight(i, k, j);
                }
            }
        }
    }
    Ok(total)
}

/// Outcome of a position solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// One position per cluster, strictly inside `(0, 1)`.
    pub positions: Vec<f64>,
    /// Total weight violated at `positions`; for the exact solver this
    /// is the certified minimum over all position vectors.
    pub violated_weight: u64,
    /// How many candidate configurations the solver examined: sign
    /// cells for the exact solver, objective evaluations for the
    /// heuristic.
    pub cells_examined: u64,
}

/// Certified minimum-violation positions via exhaustive sign-cell
/// enumeration. Errors with `TooLarge` when `b` exceeds
/// `DEFAULT_EXACT_CAP`.
pub fn solve_exact(w: &WllocInstance) -> Result<CellSolution, WllocError> {
    solve_exact_with_cap(w, DEFAULT_EXACT_CAP)
}

/// Like `solve_exact` with an explicit cap; caps above `MAX_EXACT_B`
/// are clamped to it.
pub fn solve_exact_with_cap(
    w: &WllocInstance,
    exact_cap: usize,
) -> Result<CellSolution, WllocError> {
    let cap = exact_cap.min(MAX_EXACT_B);
    if w.b > cap {
        return Err(WllocError::TooLarge { b: w.b, cap });
    }
    let arr = arrangement::arrangement(w.b);
    let per_ordering: Vec<(u64, u32)> =
        exec::map_indexed(arr.orderings.len(), |rank| best_in_ordering(w, &arr, rank));

    let mut best = (u64::MAX, 0usize, u32::MAX);
    for (rank, &(cost, word)) in per_ordering.iter().enumerate() {
        if (cost, rank, word) < best {
            best = (cost, rank, word);
        }
    }
    let (violated_weight, rank, word) = best;

    let ordering = &arr.orderings[rank];
    let gaps = arrangement::cell_witness(&arr, word);
    let positions = positions_from_gaps(ordering, &gaps);
    let check = evaluate(w, &positions).expect("solver emits one position per cluster");
    assert_eq!(
        check, violated_weight,
        "witness positions must reproduce the certified cell cost"
    );
    let cells_examined = (arr.orderings.len() * arr.cells.len()) as u64;
    Ok(CellSolution { positions, violated_weight, cells_examined })
}

/// Scans all cells of one ordering and returns the cheapest
/// `(cost, sign word)`, smallest word on ties.
fn best_in_ordering(w: &WllocInstance, arr: &Arrangement, rank: usize) -> (u64, u32) {
    let b = w.b;
    let sigma = &arr.orderings[rank];
    let mut pos_of = vec![0usize; b];
    for (p, &label) in sigma.iter().enumerate() {
        pos_of[label] = p;
    }

    // Split every weight slot into an ordering-fixed part and a part
    // toggled by one sandwich form's sign.
    let mut fixed = 0u64;
    let mut when_pos = vec![0u64; arr.forms.len()];
    let mut when_neg = vec![0u64; arr.forms.len()];
    for i in 0..b {
        for j in (0..b).filter(|&j| j != i) {
            for k in (j + 1)..b {
                if k == i {
                    continue;
                }
                let cost_j_closer = w.weight(i, k, j);
                let cost_k_closer = w.weight(i, j, k);
                let (pm, pj, pk) = (pos_of[i], pos_of[j], pos_of[k]);
                if (pj < pm) == (pk < pm) {
                    // Same side: nested spans decide the comparison.
                    let j_closer = if pj < pm { pj > pk } else { pj < pk };
                    fixed += if j_closer { cost_j_closer } else { cost_k_closer };
                } else {
                    let (left, right) = (pj.min(pk), pj.max(pk));
                    let f = arr.form_index(left, pm, right);
                    // Positive form: the right-hand point is closer.
                    let (pos_cost, neg_cost) = if pj > pk {
                        (cost_j_closer, cost_k_closer)
                    } else {
                        (cost_k_closer, cost_j_closer)
                    };
                    when_pos[f] += pos_cost;
                    when_neg[f] += neg_cost;
                }
            }
        }
    }

    let base = fixed + when_neg.iter().sum::<u64>();
    let delta: Vec<i64> =
        when_pos.iter().zip(&when_neg).map(|(&p, &n)| p as i64 - n as i64).collect();

    let mut best = (u64::MAX, u32::MAX);
    for &word in &arr.cells {
        let mut cost = base as i64;
        let mut bits = word;
        while bits != 0 {
            cost += delta[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        debug_assert!(cost >= 0);
        // Cells are scanned in ascending word order, so a strict
        // improvement test already breaks cost ties toward the
        // smallest sign word.
        if (cost as u64) < best.0 {
            best = (cost as u64, word);
        }
    }
    best
}

/// Prefix-sums exact gaps into per-label positions, then maps the
/// `[0, 1]` span affinely into `[1/64, 63/64]` so every position is
/// strictly interior. Comparison margins shrink only by the constant
/// factor, far above rounding error, so the float positions violate
/// exactly the triples the cell does.
fn positions_from_gaps(ordering: &[usize], gaps: &[BigRational]) -> Vec<f64> {
    let sixty_two = <BigRational as Scalar>::from_int(62);
    let one = <BigRational as Scalar>::one();
    let sixty_four = <BigRational as Scalar>::from_int(64);
    let mut x = vec![0f64; ordering.len()];
    let mut acc = <BigRational as Scalar>::zero();
    for (pos, &label) in ordering.iter().enumerate() {
        if pos > 0 {
            acc = acc.add(&gaps[pos - 1]);
        }
        let rescaled = sixty_two.mul(&acc).add(&one).div(&sixty_four);
        x[label] = rescaled.to_f64();
    }
    x
}

/// Restarted exact coordinate descent. Each restart draws uniform
/// start positions, then sweeps coordinates; per coordinate the
/// objective is piecewise constant, so one probe per breakpoint
/// interval finds the exact best move. Ties keep the current position,
/// hence every applied move strictly decreases the objective and the
/// descent terminates.
pub fn solve_heuristic(w: &WllocInstance, restarts: usize, seed: u64) -> CellSolution {
    let b = w.b;
    let restarts = restarts.max(1);
    let mut evals = 0u64;
    let mut best: Option<(u64, Vec<f64>)> = None;
    for restart in 0..restarts {
        let mut rng = rng::substream(seed, restart as u64);
        let mut x: Vec<f64> = (0..b).map(|_| rng.gen::<f64>()).collect();
        let mut current = evaluate(w, &x).expect("one position per cluster");
        evals += 1;
        loop {
            let mut improved = false;
            for i in 0..b {
                // Candidate positions: one interior sample per
                // interval between consecutive comparison breakpoints.
                let mut cuts = vec![0.0f64, 1.0];
                for j in (0..b).filter(|&j| j != i) {
                    cuts.push(x[j]);
                    for k in (0..b).filter(|&k| k != i && k != j) {
                        cuts.push((x[j] + x[k]) / 2.0);
                        cuts.push(2.0 * x[j] - x[k]);
                    }
                }
                cuts.retain(|v| (0.0..=1.0).contains(v));
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let mut best_move: Option<(u64, f64)> = None;
                let old = x[i];
                for pair in cuts.windows(2) {
                    let sample = (pair[0] + pair[1]) / 2.0;
                    x[i] = sample;
                    let v = evaluate(w, &x).expect("one position per cluster");
                    evals += 1;
                    if v < current && best_move.is_none_or(|(bv, _)| v < bv) {
                        best_move = Some((v, sample));
                    }
                }
                x[i] = old;
                if let Some((v, sample)) = best_move {
                    x[i] = sample;
                    current = v;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|(bc, _)| current < *bc) {
            best = Some((current, x));
        }
    }
    let (violated_weight, positions) = best.expect("at least one restart ran");
    CellSolution { positions, violated_weight, cells_examined: evals }
}

/// Exact minimum violation count for a point-level instance, solved by
/// placing every point in its own cluster. This is the brute-force
/// reference the faster solvers are checked against at small `n`.
pub fn solve_instance_exact(
    inst: &Instance,
    exact_cap: usize,
) -> Result<CellSolution, WllocError> {
    let singletons: Vec<Vec<usize>> = (0..inst.n()).map(|i| vec![i]).collect();
    let w = retraction(inst, &singletons).expect("singleton partition is valid");
    solve_exact_with_cap(&w, exact_cap)
}
