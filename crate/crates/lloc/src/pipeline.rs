//! End-to-end solver: for each candidate pivot, order the remaining
//! points by that pivot's distance comparisons, cut the ordering into
//! contiguous buckets, solve the collapsed weighted problem over bucket
//! positions, and extend the bucket positions back to a full embedding.
//! The best candidate is selected by exact or estimated violation count
//! and reported with per-stage diagnostics.
//!
//! Reports serialize to JSON with a fixed key set so downstream tooling
//! can diff runs; every field except `timings_ms` is deterministic for
//! a given instance and configuration, at any thread count.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::exec;
use crate::instance::{Embedding, Instance};
use crate::rng;
use crate::tournament::{fas_indegree, fas_local, topological_order, Tournament};
use crate::wlloc::{self, WllocError, DEFAULT_EXACT_CAP};

/// Default sample count for estimated candidate selection.
pub const DEFAULT_ESTIMATE_SAMPLES: u64 = 50_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("bucket count {b} out of range for {n} points (need 3 <= b <= n)")]
    BadBucketCount { b: usize, n: usize },
    #[error("target accuracy {0} out of range (need 0 < eps < 1)")]
    BadEpsilon(f64),
    #[error("pivot {pivot} out of range for {n} points")]
    PivotOutOfRange { pivot: usize, n: usize },
    #[error("pivot set is empty")]
    EmptyPivotSet,
}

/// How many buckets to cut each pivot ordering into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketSpec {
    /// Fixed bucket count.
    Count(usize),
    /// Derive the count from a target violated fraction `eps` in (0, 1):
    /// `b = max(3, ceil(eps^(-1/8)))`, capped at the point count.
    Epsilon(f64),
}

/// Which feedback-arc heuristic orders each pivot tournament.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FasChoice {
    /// Sort by indegree only.
    #[default]
    Indegree,
    /// Indegree sort refined by adjacent-swap local search.
    IndegreeLocal,
}

/// How bucket positions become point positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionMode {
    /// Every point sits exactly on its bucket position.
    #[default]
    Collapse,
    /// Points spread evenly across a narrow band around their bucket
    /// position, in within-bucket order. The half-width is a thousandth
    /// of the smallest positive gap between bucket positions.
    Jitter,
}

/// How candidate embeddings are compared when picking the winner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Count every violated comparison exactly.
    ExactCount,
    /// Score candidates by a seeded Monte Carlo estimate; the winner is
    /// still recounted exactly for the report.
    Estimate { samples: u64, seed: u64 },
}

/// Which pivots to try.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PivotSet {
    All,
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub bucket: BucketSpec,
    pub fas: FasChoice,
    pub extension: ExtensionMode,
    pub selection: Selection,
    /// Largest bucket count solved by exact cell enumeration; beyond it
    /// the bucket stage falls back to the seeded coordinate heuristic.
    pub exact_cap: usize,
    /// Restart count for the heuristic fallback.
    pub heuristic_restarts: usize,
    pub pivots: PivotSet,
    /// Base seed; per-pivot heuristic streams are derived from it.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bucket: BucketSpec::Count(5),
            fas: FasChoice::default(),
            extension: ExtensionMode::default(),
            selection: Selection::ExactCount,
            exact_cap: DEFAULT_EXACT_CAP,
            heuristic_restarts: 8,
            pivots: PivotSet::All,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Convenience: default configuration with a fixed bucket count.
    pub fn with_buckets(b: usize) -> Self {
        PipelineConfig { bucket: BucketSpec::Count(b), ..PipelineConfig::default() }
    }

    /// Convenience: default configuration with an accuracy target.
    pub fn with_epsilon(eps: f64) -> Self {
        PipelineConfig { bucket: BucketSpec::Epsilon(eps), ..PipelineConfig::default() }
    }
}

/// Resolves a bucket spec against the instance size.
pub(crate) fn resolve_buckets(spec: BucketSpec, n: usize) -> Result<usize, PipelineError> {
    match spec {
        BucketSpec::Count(b) => {
            if b < 3 || b > n {
                return Err(PipelineError::BadBucketCount { b, n });
            }
            Ok(b)
        }
        BucketSpec::Epsilon(eps) => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(PipelineError::BadEpsilon(eps));
            }
            let raw = eps.powf(-0.125).ceil() as usize;
            Ok(raw.max(3).min(n))
        }
    }
}

/// Cuts an ordering into `b` contiguous blocks whose sizes differ by at
/// most one, larger blocks first. The concatenation of the blocks is
/// the input ordering.
pub fn bucketize(full_ordering: &[usize], b: usize) -> Result<Vec<Vec<usize>>, PipelineError> {
    let n = full_ordering.len();
    if b < 3 || b > n {
        return Err(PipelineError::BadBucketCount { b, n });
    }
    let base = n / b;
    let extra = n % b;
    let mut out = Vec::with_capacity(b);
    let mut at = 0;
    for i in 0..b {
        let size = base + usize::from(i < extra);
        out.push(full_ordering[at..at + size].to_vec());
        at += size;
    }
    Ok(out)
}

/// Places every point according to its bucket's position. `Collapse`
/// puts each point exactly on the bucket position; `Jitter` spreads a
/// size-`s` bucket evenly over `[g - d, g + d]` in within-bucket order,
/// where `d` is a thousandth of the smallest positive gap between
/// bucket positions (singleton buckets stay centered).
pub fn extend(g: &[f64], buckets: &[Vec<usize>], mode: ExtensionMode) -> Embedding {
    assert_eq!(g.len(), buckets.len(), "one position per bucket");
    let n: usize = buckets.iter().map(Vec::len).sum();
    let delta = match mode {
        ExtensionMode::Collapse => 0.0,
        ExtensionMode::Jitter => {
            let mut min_gap = f64::INFINITY;
            for (a, ga) in g.iter().enumerate() {
                for gb in &g[a + 1..] {
                    let d = (ga - gb).abs();
                    if d > 0.0 && d < min_gap {
                        min_gap = d;
                    }
                }
            }
            // All bucket positions equal: jitter has no scale, collapse.
            if min_gap.is_finite() { 1e-3 * min_gap } else { 0.0 }
        }
    };
    let mut pos = vec![0.0f64; n];
    for (j, bucket) in buckets.iter().enumerate() {
        let s = bucket.len();
        for (t, &point) in bucket.iter().enumerate() {
            assert!(point < n, "bucketed point out of range");
            pos[point] = if delta == 0.0 || s == 1 {
                g[j]
            } else {
                g[j] - delta + 2.0 * delta * t as f64 / (s - 1) as f64
            };
        }
    }
    Embedding::new(pos)
}

/// One pivot's candidate embedding plus stage diagnostics.
#[derive(Debug, Clone)]
pub struct PivotSolution {
    pub pivot: usize,
    pub embedding: Embedding,
    /// Back arcs left by the feedback-arc heuristic on this pivot's
    /// tournament.
    pub back_arcs: u64,
    /// Violated weight of the bucket-level solution.
    pub retraction_violated: u64,
    /// False when the bucket stage used the heuristic fallback.
    pub bucket_exact: bool,
}

// Stage slots for the timing accumulator.
const STAGE_FAS: usize = 0;
const STAGE_RETRACTION: usize = 1;
const STAGE_BUCKET_SOLVE: usize = 2;
const STAGE_EXTEND: usize = 3;
const STAGE_SELECTION: usize = 4;
const STAGE_NAMES: [&str; 5] = ["fas", "retraction", "bucket_solve", "extend", "selection"];

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn solve_pivot_inner(
    inst: &Instance,
    pivot: usize,
    b: usize,
    cfg: &PipelineConfig,
) -> (PivotSolution, [f64; 5]) {
    let mut stage_ms = [0.0f64; 5];

    let t0 = Instant::now();
    let t = Tournament::from_pivot(inst, pivot);
    let fas = match cfg.fas {
        FasChoice::Indegree => fas_indegree(&t),
        FasChoice::IndegreeLocal => fas_local(&t, t.len()),
    };
    let mut full = Vec::with_capacity(inst.n());
    full.push(pivot);
    full.extend(topological_order(&t, &fas));
    stage_ms[STAGE_FAS] = ms_since(t0);

    let t1 = Instant::now();
    let buckets = bucketize(&full, b).expect("bucket count was validated before dispatch");
    let w = wlloc::retraction(inst, &buckets).expect("bucketize output is a valid partition");
    stage_ms[STAGE_RETRACTION] = ms_since(t1);

    let t2 = Instant::now();
    let (sol, bucket_exact) = match wlloc::solve_exact_with_cap(&w, cfg.exact_cap) {
        Ok(sol) => (sol, true),
        Err(WllocError::TooLarge { .. }) => {
            let seed = rng::substream_seed(cfg.seed, pivot as u64);
            (wlloc::solve_heuristic(&w, cfg.heuristic_restarts, seed), false)
        }
        Err(e) => unreachable!("retraction output is well-formed: {e}"),
    };
    stage_ms[STAGE_BUCKET_SOLVE] = ms_since(t2);

    let t3 = Instant::now();
    let embedding = extend(&sol.positions, &buckets, cfg.extension);
    stage_ms[STAGE_EXTEND] = ms_since(t3);

    (
        PivotSolution {
            pivot,
            embedding,
            back_arcs: fas.back_arcs,
            retraction_violated: sol.violated_weight,
            bucket_exact,
        },
        stage_ms,
    )
}

/// Runs the full pipeline for a single pivot.
pub fn solve_for_pivot(
    inst: &Instance,
    pivot: usize,
    cfg: &PipelineConfig,
) -> Result<PivotSolution, PipelineError> {
    let n = inst.n();
    if pivot >= n {
        return Err(PipelineError::PivotOutOfRange { pivot, n });
    }
    let b = resolve_buckets(cfg.bucket, n)?;
    Ok(solve_pivot_inner(inst, pivot, b, cfg).0)
}

/// Effective configuration echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportConfig {
    pub n: usize,
    /// Resolved bucket count.
    pub b: usize,
    pub bucket: BucketSpec,
    pub fas: FasChoice,
    pub extension: ExtensionMode,
    pub selection: Selection,
    pub exact_cap: usize,
    pub heuristic_restarts: usize,
    pub seed: u64,
    pub pivot_candidates: usize,
}

/// Per-pivot diagnostics in the report, in ascending pivot order.
/// Exactly one of `violated_exact` / `violated_estimate` is set,
/// matching the selection mode; the other serializes as null.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateRecord {
    pub pivot: usize,
    pub back_arcs: u64,
    pub retraction_violated: u64,
    /// `"exact"` or `"heuristic"`.
    pub bucket_solver: &'static str,
    pub violated_exact: Option<u64>,
    pub violated_estimate: Option<f64>,
}

/// Outcome of a full pipeline run. Serializes with this fixed key
/// order: `chosen_pivot`, `satisfied_fraction`, `violated_count`,
/// `total_constraints`, `config`, `candidates`, `timings_ms`. The
/// embedding itself is not serialized.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub chosen_pivot: usize,
    pub satisfied_fraction: f64,
    pub violated_count: u64,
    pub total_constraints: u64,
    pub config: ReportConfig,
    pub candidates: Vec<CandidateRecord>,
    /// Wall-clock milliseconds summed per stage across pivots. The only
    /// report field that varies between runs.
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(skip)]
    pub embedding: Embedding,
}

impl SolveReport {
    /// Pretty-printed JSON with the documented key order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

struct ScoredPivot {
    sol: PivotSolution,
    stage_ms: [f64; 5],
    violated_exact: Option<u64>,
    violated_estimate: Option<f64>,
    score: f64,
}

/// Runs the pipeline over every candidate pivot and reports the best
/// embedding. Deterministic for a fixed instance and configuration
/// (`timings_ms` aside) regardless of thread count: candidates are
/// scored independently and ties go to the smaller pivot.
pub fn solve(inst: &Instance, cfg: &PipelineConfig) -> Result<SolveReport, PipelineError> {
    let run_start = Instant::now();
    let n = inst.n();
    let b = resolve_buckets(cfg.bucket, n)?;
    let pivots: Vec<usize> = match &cfg.pivots {
        PivotSet::All => (0..n).collect(),
        PivotSet::Explicit(list) => {
            if list.is_empty() {
                return Err(PipelineError::EmptyPivotSet);
            }
            for &p in list {
                if p >= n {
                    return Err(PipelineError::PivotOutOfRange { pivot: p, n });
                }
            }
            let mut v = list.clone();
            v.sort_unstable();
            v.dedup();
            v
        }
    };

    let total = inst.total_constraints();
    let scored: Vec<ScoredPivot> = exec::map_indexed(pivots.len(), |i| {
        let (sol, mut stage_ms) = solve_pivot_inner(inst, pivots[i], b, cfg);
        let t = Instant::now();
        let (violated_exact, violated_estimate, score) = match cfg.selection {
            Selection::ExactCount => {
                let v = inst
                    .violated_count(&sol.embedding)
                    .expect("pipeline embeddings cover every point");
                (Some(v), None, v as f64)
            }
            Selection::Estimate { samples, seed } => {
                let frac = inst
                    .violated_estimate(
                        &sol.embedding,
                        samples.max(1),
                        rng::substream_seed(seed, sol.pivot as u64),
                    )
                    .expect("pipeline embeddings cover every point");
                let est = frac * total as f64;
                (None, Some(est), est)
            }
        };
        stage_ms[STAGE_SELECTION] = ms_since(t);
        ScoredPivot { sol, stage_ms, violated_exact, violated_estimate, score }
    });

    // Pivots are scanned in ascending order with a strict comparison,
    // so score ties resolve to the smallest pivot.
    let mut best = 0;
    for i in 1..scored.len() {
        if scored[i].score < scored[best].score {
            best = i;
        }
    }
    let winner = &scored[best];
    let violated_count = winner.violated_exact.unwrap_or_else(|| {
        inst.violated_count(&winner.sol.embedding).expect("pipeline embeddings cover every point")
    });
    let satisfied_fraction = 1.0 - violated_count as f64 / total as f64;

    let mut timings_ms = BTreeMap::new();
    for (slot, name) in STAGE_NAMES.iter().enumerate() {
        timings_ms.insert(name.to_string(), scored.iter().map(|s| s.stage_ms[slot]).sum());
    }

    let candidates = scored
        .iter()
        .map(|s| CandidateRecord {
            pivot: s.sol.pivot,
            back_arcs: s.sol.back_arcs,
            retraction_violated: s.sol.retraction_violated,
            bucket_solver: if s.sol.bucket_exact { "exact" } else { "heuristic" },
            violated_exact: s.violated_exact,
            violated_estimate: s.violated_estimate,
        })
        .collect();

    let config = ReportConfig {
        n,
        b,
        bucket: cfg.bucket,
        fas: cfg.fas,
        extension: cfg.extension,
        selection: cfg.selection,
        exact_cap: cfg.exact_cap,
        heuristic_restarts: cfg.heuristic_restarts,
        seed: cfg.seed,
        pivot_candidates: pivots.len(),
    };
    let report = SolveReport {
        chosen_pivot: winner.sol.pivot,
        satisfied_fraction,
        violated_count,
        total_constraints: total,
        config,
        candidates,
        timings_ms: {
            let mut t = timings_ms;
            t.insert("total".to_string(), ms_since(run_start));
            t
        },
        embedding: winner.sol.embedding.clone(),
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{CorruptionSpec, Instance, TieRule};
    use crate::wlloc::solve_instance_exact;

    /// Three tight pairs with center distances 10, 20, and 30: every
    /// comparison is tie-free and the pair structure survives any
    /// pivot's bucketing.
    fn three_pair_instance() -> Instance {
        let emb = Embedding::new(vec![0.0, 1.0, 10.0, 11.0, 30.0, 31.0]);
        Instance::from_embedding(&emb, TieRule::Reject).unwrap()
    }

    #[test]
    fn bucket_sizes_follow_the_larger_first_rule() {
        let ord: Vec<usize> = (0..10).collect();
        let buckets = bucketize(&ord, 3).unwrap();
        let sizes: Vec<usize> = buckets.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let flat: Vec<usize> = buckets.into_iter().flatten().collect();
        assert_eq!(flat, ord);

        let nine: Vec<usize> = (0..9).collect();
        let sizes: Vec<usize> =
            bucketize(&nine, 3).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 3]);

        let seven: Vec<usize> = (0..7).collect();
        let sizes: Vec<usize> =
            bucketize(&seven, 3).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn bucketize_rejects_bad_counts() {
        let ord: Vec<usize> = (0..10).collect();
        assert_eq!(
            bucketize(&ord, 2).unwrap_err(),
            PipelineError::BadBucketCount { b: 2, n: 10 }
        );
        assert_eq!(
            bucketize(&ord, 11).unwrap_err(),
            PipelineError::BadBucketCount { b: 11, n: 10 }
        );
        assert_eq!(bucketize(&ord, 10).unwrap().len(), 10);
    }

    /// Slot `t` of a size-`s` bucket band, written exactly as `extend`
    /// computes it so equality checks are bit-precise.
    fn band(g: f64, delta: f64, t: usize, s: usize) -> f64 {
        g - delta + 2.0 * delta * t as f64 / (s - 1) as f64
    }

    #[test]
    fn jitter_spreads_buckets_around_their_centers() {
        let g = [0.1, 0.9];
        let buckets = vec![vec![0, 1], vec![2]];
        let delta = 1e-3 * (0.9 - 0.1);
        assert_eq!(delta, 8e-4);

        let jittered = extend(&g, &buckets, ExtensionMode::Jitter);
        assert_eq!(
            jittered.positions(),
            &[band(0.1, delta, 0, 2), band(0.1, delta, 1, 2), 0.9]
        );
        assert!((jittered.positions()[0] - (0.1 - delta)).abs() < 1e-15);
        assert!((jittered.positions()[1] - (0.1 + delta)).abs() < 1e-15);

        let collapsed = extend(&g, &buckets, ExtensionMode::Collapse);
        assert_eq!(collapsed.positions(), &[0.1, 0.1, 0.9]);
    }

    #[test]
    fn jitter_keeps_within_bucket_order_and_band() {
        let g = [0.4, 0.1, 0.8];
        let buckets = vec![vec![5, 0, 3], vec![1, 4], vec![2]];
        let emb = extend(&g, &buckets, ExtensionMode::Jitter);
        let x = emb.positions();
        let delta = 1e-3 * 0.3; // smallest positive gap is |0.4 - 0.1|
        assert!(x[5] < x[0] && x[0] < x[3], "bucket order preserved");
        assert!((x[0] - 0.4).abs() < 1e-15, "middle of an odd bucket sits near the center");
        assert_eq!(x[5], band(0.4, delta, 0, 3));
        assert_eq!(x[3], band(0.4, delta, 2, 3));
        assert_eq!(x[1], band(0.1, delta, 0, 2));
        assert_eq!(x[4], band(0.1, delta, 1, 2));
        assert_eq!(x[2], 0.8);
    }

    #[test]
    fn equal_bucket_positions_fall_back_to_collapse() {
        let g = [0.5, 0.5];
        let buckets = vec![vec![0, 1], vec![2]];
        let emb = extend(&g, &buckets, ExtensionMode::Jitter);
        assert_eq!(emb.positions(), &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn collapse_on_three_tight_pairs_satisfies_four_fifths() {
        let inst = three_pair_instance();
        let cfg = PipelineConfig::with_buckets(3);
        let report = solve(&inst, &cfg).unwrap();
        assert_eq!(report.total_constraints, 60);
        assert_eq!(report.violated_count, 12);
        assert_eq!(report.satisfied_fraction, 0.8);
        assert_eq!(report.chosen_pivot, 0, "ties resolve to the smallest pivot");
        assert_eq!(report.config.b, 3);
        assert_eq!(report.candidates.len(), 6);
        for c in &report.candidates {
            assert_eq!(c.bucket_solver, "exact");
            assert_eq!(c.retraction_violated, 0, "pair clusters retract cleanly");
            assert_eq!(c.violated_exact, Some(12));
            assert_eq!(c.violated_estimate, None);
        }
    }

    /// Under collapse, a violated comparison is exactly one whose
    /// compared pair shares a bucket (both orders collapse to a tie) or
    /// whose asserted-farther point shares the pivot's bucket.
    #[test]
    fn collapse_violations_are_exactly_the_same_bucket_comparisons() {
        let inst = three_pair_instance();
        let cfg = PipelineConfig::with_buckets(3);
        let sol = solve_for_pivot(&inst, 0, &cfg).unwrap();
        let x = sol.embedding.positions();
        let bucket_of = |p: usize| p / 2; // pairs stay contiguous here
        let n = inst.n();
        for u in 0..n {
            for v in 0..n {
                for w in (v + 1)..n {
                    if u == v || u == w || !inst.asserts(u, v, w) {
                        continue;
                    }
                    // Ties count as violations, hence `>=`.
                    let violated = (x[u] - x[v]).abs() >= (x[u] - x[w]).abs();
                    let expect = bucket_of(v) == bucket_of(w) || bucket_of(u) == bucket_of(w);
                    assert_eq!(violated, expect, "triple ({u}, {v}, {w})");
                }
            }
        }
    }

    #[test]
    fn jitter_dominates_collapse_here() {
        let inst = three_pair_instance();
        let collapse = solve(&inst, &PipelineConfig::with_buckets(3)).unwrap();
        let jitter = solve(
            &inst,
            &PipelineConfig {
                extension: ExtensionMode::Jitter,
                ..PipelineConfig::with_buckets(3)
            },
        )
        .unwrap();
        assert!(jitter.violated_count <= collapse.violated_count);
        assert_eq!(jitter.violated_count, 0, "jitter recovers the pair order exactly");
    }

    #[test]
    fn singleton_buckets_reach_the_global_minimum() {
        for seed in [3u64, 11, 27] {
            let (clean, _) = crate::instance::planted_uniform(5, seed).unwrap();
            let inst = clean
                .corrupt(CorruptionSpec { fraction: 0.25, seed: seed ^ 0xABCD })
                .unwrap();
            let oracle = solve_instance_exact(&inst, 5).unwrap();
            let report = solve(&inst, &PipelineConfig::with_buckets(5)).unwrap();
            assert_eq!(
                report.violated_count, oracle.violated_weight,
                "seed {seed}: singleton buckets must match the brute-force optimum"
            );
        }
    }

    #[test]
    fn epsilon_resolves_to_bucket_counts() {
        assert_eq!(resolve_buckets(BucketSpec::Epsilon(0.5), 100).unwrap(), 3);
        assert_eq!(resolve_buckets(BucketSpec::Epsilon(0.02), 100).unwrap(), 3);
        // 1e-5^(-1/8) = 10^(5/8) = 4.21..., so five buckets.
        assert_eq!(resolve_buckets(BucketSpec::Epsilon(1e-5), 100).unwrap(), 5);
        // Capped at n.
        assert_eq!(resolve_buckets(BucketSpec::Epsilon(1e-9), 4).unwrap(), 4);
        for bad in [0.0, 1.0, -0.3, f64::NAN] {
            assert!(matches!(
                resolve_buckets(BucketSpec::Epsilon(bad), 10),
                Err(PipelineError::BadEpsilon(_))
            ));
        }
        assert!(matches!(
            resolve_buckets(BucketSpec::Count(2), 10),
            Err(PipelineError::BadBucketCount { b: 2, n: 10 })
        ));
        assert!(matches!(
            resolve_buckets(BucketSpec::Count(11), 10),
            Err(PipelineError::BadBucketCount { b: 11, n: 10 })
        ));
    }

    #[test]
    fn explicit_pivots_are_validated_sorted_and_deduped() {
        let inst = three_pair_instance();
        let base = PipelineConfig::with_buckets(3);

        let err = solve(
            &inst,
            &PipelineConfig { pivots: PivotSet::Explicit(vec![]), ..base.clone() },
        )
        .unwrap_err();
        assert_eq!(err, PipelineError::EmptyPivotSet);

        let err = solve(
            &inst,
            &PipelineConfig { pivots: PivotSet::Explicit(vec![1, 6]), ..base.clone() },
        )
        .unwrap_err();
        assert_eq!(err, PipelineError::PivotOutOfRange { pivot: 6, n: 6 });

        let report = solve(
            &inst,
            &PipelineConfig { pivots: PivotSet::Explicit(vec![3, 1, 3]), ..base },
        )
        .unwrap();
        let pivots: Vec<usize> = report.candidates.iter().map(|c| c.pivot).collect();
        assert_eq!(pivots, vec![1, 3]);
        assert_eq!(report.config.pivot_candidates, 2);
    }

    #[test]
    fn pivot_out_of_range_is_rejected_for_single_solves() {
        let inst = three_pair_instance();
        let cfg = PipelineConfig::with_buckets(3);
        assert_eq!(
            solve_for_pivot(&inst, 6, &cfg).unwrap_err(),
            PipelineError::PivotOutOfRange { pivot: 6, n: 6 }
        );
    }

    #[test]
    fn estimate_selection_is_deterministic_and_recounts_the_winner() {
        let (clean, _) = crate::instance::planted_clustered(12, 4, 0.01, 5).unwrap();
        let inst = clean.corrupt(CorruptionSpec { fraction: 0.1, seed: 99 }).unwrap();
        let cfg = PipelineConfig {
            selection: Selection::Estimate { samples: 2_000, seed: 9 },
            ..PipelineConfig::with_buckets(4)
        };
        let a = solve(&inst, &cfg).unwrap();
        let b = solve(&inst, &cfg).unwrap();
        assert_eq!(a.chosen_pivot, b.chosen_pivot);
        assert_eq!(a.violated_count, b.violated_count);
        assert_eq!(a.embedding.positions(), b.embedding.positions());
        for (ca, cb) in a.candidates.iter().zip(&b.candidates) {
            assert_eq!(ca.violated_estimate, cb.violated_estimate);
            assert_eq!(ca.violated_exact, None);
            assert!(ca.violated_estimate.is_some());
        }
        // The reported count is the exact recount of the chosen embedding.
        assert_eq!(
            a.violated_count,
            inst.violated_count(&a.embedding).unwrap()
        );
    }

    #[test]
    fn oversize_buckets_fall_back_to_the_heuristic() {
        let (clean, _) = crate::instance::planted_clustered(14, 7, 0.005, 2).unwrap();
        let cfg = PipelineConfig::with_buckets(7);
        let report = solve(&clean, &cfg).unwrap();
        for c in &report.candidates {
            assert_eq!(c.bucket_solver, "heuristic");
        }
        assert!(report.satisfied_fraction > 0.5);
    }

    #[test]
    fn report_json_keeps_the_documented_key_order() {
        let inst = three_pair_instance();
        let report = solve(&inst, &PipelineConfig::with_buckets(3)).unwrap();
        let json = report.to_json();
        let keys = [
            "\"chosen_pivot\"",
            "\"satisfied_fraction\"",
            "\"violated_count\"",
            "\"total_constraints\"",
            "\"config\"",
            "\"candidates\"",
            "\"timings_ms\"",
        ];
        let mut last = 0;
        for key in keys {
            let at = json.find(key).unwrap_or_else(|| panic!("missing {key}"));
            assert!(at > last, "{key} out of order");
            last = at;
        }
        assert!(!json.contains("\"embedding\""), "embedding stays out of the report");
        for stage in STAGE_NAMES {
            assert!(json.contains(&format!("\"{stage}\"")), "missing stage {stage}");
        }
        assert!(json.contains("\"total\""));
        assert!(json.contains("\"bucket_solver\": \"exact\""));
    }

    #[test]
    fn config_validation_happens_before_any_work() {
        let inst = three_pair_instance();
        assert_eq!(
            solve(&inst, &PipelineConfig::with_buckets(2)).unwrap_err(),
            PipelineError::BadBucketCount { b: 2, n: 6 }
        );
        assert_eq!(
            solve(&inst, &PipelineConfig::with_buckets(7)).unwrap_err(),
            PipelineError::BadBucketCount { b: 7, n: 6 }
        );
        assert!(matches!(
            solve(&inst, &PipelineConfig::with_epsilon(0.0)).unwrap_err(),
            PipelineError::BadEpsilon(_)
        ));
    }
}
