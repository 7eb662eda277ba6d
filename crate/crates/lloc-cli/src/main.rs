//! Command-line front end for the `lloc` solver library.
//!
//! Seven subcommands cover the full workflow: `gen` and `corrupt` produce
//! instance files, `solve` runs the pivot-sweep solver, `solve-zero` decides
//! perfect embeddability, `eval` scores an embedding, `oracle` certifies the
//! global minimum on small instances, and `bench` sweeps a parameter grid
//! into CSV.
//!
//! Exit codes are stable: 0 success, 2 malformed input file, 3 bad flag
//! value or combination, 4 instance too large for an exact-solver guard.
//! The `LLOC_THREADS` environment variable caps worker threads (0 = auto).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use lloc::instance::{
    mixed_gap_instance, mixed_gap_positions, planted_clustered, planted_uniform, CorruptionSpec,
};
use lloc::pipeline::{
    self, BucketSpec, ExtensionMode, FasChoice, PipelineConfig, PivotSet, Selection,
    DEFAULT_ESTIMATE_SAMPLES,
};
use lloc::warmup::solve_zero;
use lloc::wlloc::{solve_instance_exact, DEFAULT_EXACT_CAP, MAX_EXACT_B};
use lloc::{Embedding, Instance};

const EXIT_PARSE: u8 = 2;
const EXIT_FLAG: u8 = 3;
const EXIT_SIZE: u8 = 4;

/// Above this point count, `solve` defaults to sampled pivot selection.
const ESTIMATE_THRESHOLD: usize = 150;

/// Offset separating the corruption stream from the generator stream when
/// `bench` derives both from one grid seed.
const CORRUPT_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Parser)]
#[command(
    name = "lloc",
    version,
    about = "Generate, corrupt, solve, and score ordinal line-embedding instances"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted instance and its ground-truth embedding.
    Gen(GenArgs),
    /// Flip a random share of an instance's comparison bits.
    Corrupt(CorruptArgs),
    /// Run the pivot-sweep solver and write a report.
    Solve(SolveArgs),
    /// Decide whether a zero-violation embedding exists.
    SolveZero(SolveZeroArgs),
    /// Score an embedding against an instance.
    Eval(EvalArgs),
    /// Certified global minimum by exhaustive search (small n only).
    Oracle(OracleArgs),
    /// Run a benchmark grid from a config file and emit CSV rows.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of points.
    #[arg(long)]
    n: usize,
    /// Distribution: uniform | clustered:K:SPREAD | mixed-gap:K.
    #[arg(long)]
    dist: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance file path; the ground-truth embedding lands next to it
    /// with extension `.emb`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorruptArgs {
    /// Instance file to corrupt.
    instance: PathBuf,
    /// Fraction of comparison slots to flip, in [0, 1].
    #[arg(long)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file to solve.
    instance: PathBuf,
    /// Bucket count (3 <= b <= n). Default: min(5, n).
    #[arg(long, conflicts_with = "eps")]
    b: Option<usize>,
    /// Distortion target in (0, 1); mapped to a bucket count.
    #[arg(long)]
    eps: Option<f64>,
    /// Pivot-ordering heuristic.
    #[arg(long, value_enum, default_value_t = FasFlag::Indegree)]
    fas: FasFlag,
    /// How bucket positions become point positions.
    #[arg(long, value_enum, default_value_t = ModeFlag::Collapse)]
    mode: ModeFlag,
    /// Pivot scoring; defaults to exact up to n = 150 and estimate above.
    #[arg(long, value_enum)]
    select: Option<SelectFlag>,
    /// Sample count for estimate scoring.
    #[arg(long, default_value_t = DEFAULT_ESTIMATE_SAMPLES)]
    samples: u64,
    /// Largest bucket count handed to the exact bucket solver.
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: usize,
    /// Restart count for the heuristic bucket fallback.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; the embedding lands next to it with extension `.emb`.
    /// Without it the report goes to stdout and no embedding is written.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveZeroArgs {
    /// Instance file to test.
    instance: PathBuf,
    /// Report path; a witness embedding lands next to it with extension
    /// `.emb` when one exists. Without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Instance file.
    instance: PathBuf,
    /// Embedding file to score.
    embedding: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Instance file to solve exhaustively.
    instance: PathBuf,
    /// Size guard: instances with more points exit with code 4.
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    exact_cap: usize,
    /// Report path; the witness embedding lands next to it with extension
    /// `.emb`. Without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON grid config: {"cells": [{n, dist, corruption, b, method, seeds}]}.
    config: PathBuf,
    /// CSV output path. Without it rows go to stdout and the summary
    /// table moves to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FasFlag {
    Indegree,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeFlag {
    Collapse,
    Jitter,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectFlag {
    Exact,
    Estimate,
}

/// A command failure carrying the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(message: String) -> Self {
        Failure { code: EXIT_PARSE, message }
    }

    fn flag(message: impl Into<String>) -> Self {
        Failure { code: EXIT_FLAG, message: message.into() }
    }

    fn size(message: String) -> Self {
        Failure { code: EXIT_SIZE, message }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Failure { code: 1, message: format!("{}: {err}", path.display()) }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version are successes; everything else clap
            // rejects is a flag error.
            let benign = matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = err.print();
            return ExitCode::from(if benign { 0 } else { EXIT_FLAG });
        }
    };
    let run = init_threads().and_then(|()| match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Corrupt(a) => cmd_corrupt(a),
        Command::Solve(a) => cmd_solve(a),
        Command::SolveZero(a) => cmd_solve_zero(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bench(a) => cmd_bench(a),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Applies `LLOC_THREADS` before any worker pool spins up.
fn init_threads() -> CliResult {
    let Some(raw) = std::env::var_os("LLOC_THREADS") else {
        return Ok(());
    };
    let raw = raw.to_string_lossy();
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::flag(format!("LLOC_THREADS must be a non-negative integer, got {raw:?}")))?;
    if threads == 0 {
        return Ok(()); // auto
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::flag(format!("could not size the global thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads; // sequential build: always one thread
    Ok(())
}

enum Dist {
    Uniform,
    Clustered { clusters: usize, spread: f64 },
    MixedGap { k: usize },
}

fn parse_dist(s: &str) -> Result<Dist, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["uniform"] => Ok(Dist::Uniform),
        ["clustered", k, spread] => {
            let clusters: usize = k
                .parse()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| Failure::flag(format!("bad cluster count in {s:?}")))?;
            let spread: f64 = spread
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| Failure::flag(format!("bad spread in {s:?}")))?;
            Ok(Dist::Clustered { clusters, spread })
        }
        ["mixed-gap", k] | ["mixed_gap", k] => {
            let k: usize = k
                .parse()
                .ok()
                .filter(|&k| k >= 2)
                .ok_or_else(|| Failure::flag(format!("bad gap parameter in {s:?} (need k >= 2)")))?;
            Ok(Dist::MixedGap { k })
        }
        _ => Err(Failure::flag(format!(
            "unknown distribution {s:?}; expected uniform | clustered:K:SPREAD | mixed-gap:K"
        ))),
    }
}

/// Draws an instance plus its planted embedding for one grid point.
fn realize(dist: &Dist, n: usize, seed: u64) -> Result<(Instance, Embedding), Failure> {
    match *dist {
        Dist::Uniform => planted_uniform(n, seed).map_err(|e| Failure::flag(e.to_string())),
        Dist::Clustered { clusters, spread } => {
            if clusters > n {
                return Err(Failure::flag(format!(
                    "clustered:{clusters} needs at least {clusters} points, got n = {n}"
                )));
            }
            planted_clustered(n, clusters, spread, seed).map_err(|e| Failure::flag(e.to_string()))
        }
        Dist::MixedGap { k } => {
            let want = 2 * k + 1;
            if n != want {
                return Err(Failure::flag(format!("mixed-gap:{k} fixes n = {want}, got n = {n}")));
            }
            Ok((mixed_gap_instance(k), mixed_gap_positions(k)))
        }
    }
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    Instance::parse_text(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn read_embedding(path: &Path) -> Result<Embedding, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    Embedding::parse_text(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> CliResult {
    fs::write(path, content).map_err(|e| Failure::io(path, e))
}

/// Prints a report to stdout, or writes it to `out` with an optional
/// sibling embedding file (same stem, extension `.emb`).
fn emit_report(out: Option<&Path>, report: &str, embedding: Option<&Embedding>) -> CliResult {
    match out {
        None => {
            println!("{report}");
            Ok(())
        }
        Some(path) => {
            write_file(path, &format!("{report}\n"))?;
            if let Some(emb) = embedding {
                write_file(&path.with_extension("emb"), &emb.to_text())?;
            }
            Ok(())
        }
    }
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let dist = parse_dist(&a.dist)?;
    let (inst, truth) = realize(&dist, a.n, a.seed)?;
    write_file(&a.out, &inst.to_text())?;
    write_file(&a.out.with_extension("emb"), &truth.to_text())
}

fn cmd_corrupt(a: CorruptArgs) -> CliResult {
    let inst = read_instance(&a.instance)?;
    let spec = CorruptionSpec { fraction: a.fraction, seed: a.seed };
    let corrupted = inst.corrupt(spec).map_err(|e| Failure::flag(e.to_string()))?;
    write_file(&a.out, &corrupted.to_text())
}

fn cmd_solve(a: SolveArgs) -> CliResult {
    let inst = read_instance(&a.instance)?;
    let n = inst.n();
    if a.samples == 0 {
        return Err(Failure::flag("--samples must be positive"));
    }
    let bucket = match (a.b, a.eps) {
        (Some(b), _) => BucketSpec::Count(b),
        (None, Some(eps)) => BucketSpec::Epsilon(eps),
        (None, None) => BucketSpec::Count(n.min(5)),
    };
    let estimate = Selection::Estimate { samples: a.samples, seed: a.seed };
    let selection = match a.select {
        Some(SelectFlag::Exact) => Selection::ExactCount,
        Some(SelectFlag::Estimate) => estimate,
        None if n > ESTIMATE_THRESHOLD => estimate,
        None => Selection::ExactCount,
    };
    let cfg = PipelineConfig {
        bucket,
        fas: match a.fas {
            FasFlag::Indegree => FasChoice::Indegree,
            FasFlag::Local => FasChoice::IndegreeLocal,
        },
        extension: match a.mode {
            ModeFlag::Collapse => ExtensionMode::Collapse,
            ModeFlag::Jitter => ExtensionMode::Jitter,
        },
        selection,
        exact_cap: a.exact_cap,
        heuristic_restarts: a.restarts,
        pivots: PivotSet::All,
        seed: a.seed,
    };
    let report = pipeline::solve(&inst, &cfg).map_err(|e| Failure::flag(e.to_string()))?;
    emit_report(a.out.as_deref(), &report.to_json(), Some(&report.embedding))
}

fn cmd_solve_zero(a: SolveZeroArgs) -> CliResult {
    let inst = read_instance(&a.instance)?;
    let witness = solve_zero(&inst).ok();
    let report = json!({
        "perfect": witness.is_some(),
        "n": inst.n(),
        "total_constraints": inst.total_constraints(),
        "embedding": witness.as_ref().map(|e| e.positions().to_vec()),
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    emit_report(a.out.as_deref(), &text, witness.as_ref())
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let inst = read_instance(&a.instance)?;
    let emb = read_embedding(&a.embedding)?;
    let violated = inst.violated_count(&emb).map_err(|e| Failure::flag(e.to_string()))?;
    let total = inst.total_constraints();
    let mut goodness: Vec<f64> = (0..inst.n())
        .map(|i| inst.pivot_goodness(&emb, i).expect("length checked by violated_count"))
        .collect();
    goodness.sort_by(f64::total_cmp);
    let report = json!({
        "n": inst.n(),
        "total_constraints": total,
        "violated_count": violated,
        "satisfied_fraction": 1.0 - violated as f64 / total as f64,
        "pivot_goodness": {
            "min": quantile(&goodness, 0.0),
            "q1": quantile(&goodness, 0.25),
            "median": quantile(&goodness, 0.5),
            "q3": quantile(&goodness, 0.75),
            "max": quantile(&goodness, 1.0),
        },
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn cmd_oracle(a: OracleArgs) -> CliResult {
    let inst = read_instance(&a.instance)?;
    let cap = a.exact_cap.min(MAX_EXACT_B);
    if inst.n() > cap {
        return Err(Failure::size(format!(
            "exhaustive search is capped at n = {cap}; instance has n = {}",
            inst.n()
        )));
    }
    let sol = solve_instance_exact(&inst, cap).map_err(|e| Failure::flag(e.to_string()))?;
    let emb = Embedding::new(sol.positions);
    let total = inst.total_constraints();
    let report = json!({
        "minimum_violated": sol.violated_weight,
        "total_constraints": total,
        "satisfied_fraction": 1.0 - sol.violated_weight as f64 / total as f64,
        "cells_examined": sol.cells_examined,
        "embedding": emb.positions(),
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    emit_report(a.out.as_deref(), &text, Some(&emb))
}

#[derive(Deserialize)]
struct BenchConfig {
    cells: Vec<BenchCell>,
}

#[derive(Deserialize)]
struct BenchCell {
    n: usize,
    dist: String,
    #[serde(default)]
    corruption: f64,
    b: usize,
    method: String,
    seeds: Vec<u64>,
}

struct BenchRow {
    cell: usize,
    id: String,
    n: usize,
    b: usize,
    corruption: f64,
    seed: u64,
    method: String,
    satisfied: Option<f64>,
    wall_ms: f64,
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let text = fs::read_to_string(&a.config).map_err(|e| Failure::io(&a.config, e))?;
    let config: BenchConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::parse(format!("{}: {e}", a.config.display())))?;
    let mut rows = Vec::new();
    for (cell_index, cell) in config.cells.iter().enumerate() {
        for &seed in &cell.seeds {
            rows.push(run_bench_point(cell, cell_index, seed));
        }
    }
    // Deterministic emission order regardless of how rows were produced.
    rows.sort_by_key(|r| (r.cell, r.seed));
    let csv = render_csv(&rows);
    let summary = render_summary(&config.cells, &rows);
    match a.out {
        Some(path) => {
            write_file(&path, &csv)?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn run_bench_point(cell: &BenchCell, cell_index: usize, seed: u64) -> BenchRow {
    let start = Instant::now();
    let outcome = bench_point(cell, seed);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let id = format!(
        "{}_n{}_c{}_b{}_{}_s{}",
        sanitize(&cell.dist),
        cell.n,
        cell.corruption,
        cell.b,
        sanitize(&cell.method),
        seed
    );
    if let Err(msg) = &outcome {
        eprintln!("bench row {id}: {msg}");
    }
    BenchRow {
        cell: cell_index,
        id,
        n: cell.n,
        b: cell.b,
        corruption: cell.corruption,
        seed,
        method: cell.method.clone(),
        satisfied: outcome.ok(),
        wall_ms,
    }
}

/// Runs one grid point; any failure becomes a `failed` CSV row, not a
/// process exit.
fn bench_point(cell: &BenchCell, seed: u64) -> Result<f64, String> {
    let dist = parse_dist(&cell.dist).map_err(|f| f.message)?;
    let (inst, _truth) = realize(&dist, cell.n, seed).map_err(|f| f.message)?;
    let inst = if cell.corruption > 0.0 {
        let spec = CorruptionSpec { fraction: cell.corruption, seed: seed ^ CORRUPT_STREAM };
        inst.corrupt(spec).map_err(|e| e.to_string())?
    } else {
        inst
    };
    let extension = match cell.method.as_str() {
        "collapse" => ExtensionMode::Collapse,
        "jitter" => ExtensionMode::Jitter,
        other => return Err(format!("unknown method {other:?} (expected collapse or jitter)")),
    };
    let cfg = PipelineConfig {
        bucket: BucketSpec::Count(cell.b),
        extension,
        seed,
        ..PipelineConfig::default()
    };
    let report = pipeline::solve(&inst, &cfg).map_err(|e| e.to_string())?;
    Ok(report.satisfied_fraction)
}

/// Keeps grid ids CSV-safe and underscore-delimited.
fn sanitize(s: &str) -> String {
    s.replace([',', ':', ' ', '\n'], "-")
}

fn render_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("id,n,b,corruption,seed,method,satisfied_fraction,wall_ms,failed\n");
    for r in rows {
        let satisfied = r.satisfied.map(|f| f.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.3},{}\n",
            r.id,
            r.n,
            r.b,
            r.corruption,
            r.seed,
            sanitize(&r.method),
            satisfied,
            r.wall_ms,
            r.satisfied.is_none()
        ));
    }
    out
}

fn render_summary(cells: &[BenchCell], rows: &[BenchRow]) -> String {
    if cells.is_empty() {
        return String::from("no cells\n");
    }
    let mut out = String::new();
    for (i, cell) in cells.iter().enumerate() {
        let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.cell == i).collect();
        let ok: Vec<f64> = mine.iter().filter_map(|r| r.satisfied).collect();
        let failed = mine.len() - ok.len();
        if ok.is_empty() {
            out.push_str(&format!(
                "{} n={} b={} c={} {}: no successful runs, {} failed\n",
                cell.dist, cell.n, cell.b, cell.corruption, cell.method, failed
            ));
        } else {
            let (mean, sd) = mean_stddev(&ok);
            out.push_str(&format!(
                "{} n={} b={} c={} {}: satisfied {:.6} ± {:.6} over {} run(s), {} failed\n",
                cell.dist,
                cell.n,
                cell.b,
                cell.corruption,
                cell.method,
                mean,
                sd,
                ok.len(),
                failed
            ));
        }
    }
    out
}

/// Mean and sample standard deviation; a single value has deviation 0.
fn mean_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
