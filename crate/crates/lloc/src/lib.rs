//! Line embeddings from ordinal distance comparisons.
//!
//! An instance over `n` points records, for every pivot `u` and every
//! unordered pair `{v, w}` of other points, which of the two the pivot
//! considers closer. An embedding assigns each point a coordinate on the
//! real line; a comparison `(u, v, w)` ("v is closer to u than w") is
//! satisfied when `|f(u) - f(v)| < |f(u) - f(w)|` holds strictly. Ties
//! always count as violations. The solvers in this crate look for
//! embeddings that violate as few comparisons as possible.
//!
//! The crate is organized around the data flow of the bucketed pipeline:
//!
//! * [`instance`] — dense instance storage, generators, corruption,
//!   violation counting, and the text serialization format.
//! * [`tournament`] — per-pivot orientation digraphs and feedback-arc-set
//!   heuristics used to order points by a pivot's comparisons.
//! * [`wlloc`] — the weighted bucket-level problem: retraction of an
//!   instance onto buckets, an exact cell-enumeration solver for small
//!   bucket counts, and a coordinate-descent heuristic.
//! * [`warmup`] — the exact zero-violation decision procedure: per-pivot
//!   ordering, the gap feasibility system, and an LP-backed search.
//! * [`pipeline`] — the end-to-end solver: per-pivot ordering, bucketing,
//!   retraction, bucket placement, extension back to all points, and
//!   candidate selection with a machine-readable report.
//!
//! # Determinism
//!
//! Every randomized operation takes an explicit 64-bit seed and draws from
//! a ChaCha8 stream seeded with it (`rand_chacha::ChaCha8Rng`), so results
//! are reproducible across platforms. Per-pivot streams are derived by
//! mixing the pivot id into the seed with a SplitMix64 step. Parallel code
//! paths (enabled by the default `parallel` feature, backed by rayon) use
//! deterministic reductions: fixed seeds give identical results at any
//! thread count, and with the feature disabled the same sequential results
//! are produced.

// The numeric kernels walk several same-length arrays by one index; the
// iterator rewrites clippy suggests obscure that coupling.
#![allow(clippy::needless_range_loop)]

pub mod instance;
pub mod pipeline;
pub mod tournament;
pub mod warmup;
pub mod wlloc;

mod arrangement;
mod exec;
mod rng;
mod simplex;

pub use instance::{Embedding, Instance, TieRule};
pub use pipeline::{PipelineConfig, SolveReport};
