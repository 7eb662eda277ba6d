//! Dense two-phase simplex, generic over the coefficient field.
//!
//! The solver is deliberately small: all production problems in this
//! crate are tiny (tens of rows, tens of columns), but some of them
//! must be decided *exactly* — open-cell certificates and perfect-
//! embedding verdicts cannot tolerate rounding. The tableau is
//! therefore generic over [`Scalar`], instantiated with `f64` (fast,
//! tolerance-based) or `num::BigRational` (exact). Bland's smallest-
//! index rule is used throughout: with exact arithmetic it guarantees
//! termination, and the problems are small enough that its slower
//! progress never matters.
//!
//! Variables are intrinsically nonnegative. Rows may be `≤`, `≥`, or
//! `=`; right-hand sides are normalized to be nonnegative, slack
//! columns provide the initial basis where possible, and artificial
//! variables cover the rest (phase 1 minimizes their sum and prunes
//! redundant rows before phase 2 optimizes the real objective).

use num::BigRational;

/// Field operations plus a sign test; the sign test is where the f64
/// tolerance lives.
pub(crate) trait Scalar: Clone + PartialOrd + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(v: i64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Strictly positive, beyond any tolerance.
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool {
        self.neg().is_pos()
    }
    fn is_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
    fn to_f64(&self) -> f64;
}

const F64_EPS: f64 = 1e-9;

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_pos(&self) -> bool {
        *self > F64_EPS
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        num::Zero::zero()
    }
    fn one() -> Self {
        num::One::one()
    }
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(v.into())
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_pos(&self) -> bool {
        self > &<Self as Scalar>::zero()
    }
    fn to_f64(&self) -> f64 {
        num::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome<S> {
    /// Minimum found; `solution` holds the structural variables.
    Optimal { objective: S, solution: Vec<S> },
    Infeasible,
    Unbounded,
    /// The pivot cap was hit; callers treat this as a numerical failure.
    IterationLimit,
}

/// A linear program `min c·x` over `x ≥ 0` subject to added rows.
pub(crate) struct LpProblem<S> {
    n_vars: usize,
    objective: Vec<S>,
    rows: Vec<(Vec<S>, S, RowKind)>,
}

impl<S: Scalar> LpProblem<S> {
    pub fn new(n_vars: usize) -> Self {
        LpProblem { n_vars, objective: vec![S::zero(); n_vars], rows: Vec::new() }
    }

    pub fn set_objective(&mut self, c: Vec<S>) {
        assert_eq!(c.len(), self.n_vars);
        self.objective = c;
    }

    fn push(&mut self, coeffs: Vec<S>, rhs: S, kind: RowKind) {
        assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push((coeffs, rhs, kind));
    }

    // Only exercised by tests today, kept for builder symmetry.
    #[allow(dead_code)]
    pub fn add_le(&mut self, coeffs: Vec<S>, rhs: S) {
        self.push(coeffs, rhs, RowKind::Le);
    }

    pub fn add_ge(&mut self, coeffs: Vec<S>, rhs: S) {
        self.push(coeffs, rhs, RowKind::Ge);
    }

    pub fn add_eq(&mut self, coeffs: Vec<S>, rhs: S) {
        self.push(coeffs, rhs, RowKind::Eq);
    }

    /// Two-phase simplex with Bland's rule and a pivot cap.
    pub fn solve(&self, max_pivots: usize) -> LpOutcome<S> {
        Tableau::build(self).solve(&self.objective, max_pivots)
    }
}

struct Tableau<S> {
    /// Coefficient matrix including slack and artificial columns.
    rows: Vec<Vec<S>>,
    rhs: Vec<S>,
    /// Basic variable (column index) of each row.
    basis: Vec<usize>,
    n_structural: usize,
    /// Columns at or beyond this index are artificial.
    art_start: usize,
}

impl<S: Scalar> Tableau<S> {
    fn build(p: &LpProblem<S>) -> Self {
        // Normalize to rhs ≥ 0 and decide each row's basis column:
        // `≤` rows take a slack; `≥` rows with zero rhs are negated into
        // `≤` form; everything else needs an artificial.
        let mut norm: Vec<(Vec<S>, S, RowKind)> = Vec::with_capacity(p.rows.len());
        for (coeffs, rhs, kind) in &p.rows {
            let (mut c, mut r, mut k) = (coeffs.clone(), rhs.clone(), *kind);
            if r.is_neg() {
                c = c.iter().map(S::neg).collect();
                r = r.neg();
                k = match k {
                    RowKind::Le => RowKind::Ge,
                    RowKind::Ge => RowKind::Le,
                    RowKind::Eq => RowKind::Eq,
                };
            }
            if k == RowKind::Ge && r.is_zero() {
                c = c.iter().map(S::neg).collect();
                r = S::zero();
                k = RowKind::Le;
            }
            norm.push((c, r, k));
        }
        let m = norm.len();
        let n_slack = norm
            .iter()
            .filter(|(_, _, k)| matches!(k, RowKind::Le | RowKind::Ge))
            .count();
        let n_art = norm
            .iter()
            .filter(|(_, r, k)| *k == RowKind::Eq || (*k == RowKind::Ge && r.is_pos()))
            .count();
        let n = p.n_vars;
        let art_start = n + n_slack;
        let width = art_start + n_art;
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_slack = n;
        let mut next_art = art_start;
        for (coeffs, r, kind) in norm {
            let mut row = vec![S::zero(); width];
            row[..n].clone_from_slice(&coeffs);
            match kind {
                RowKind::Le => {
                    row[next_slack] = S::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                RowKind::Ge => {
                    // rhs > 0 here (zero-rhs rows were converted above):
                    // surplus column plus an artificial for the basis.
                    row[next_slack] = S::one().neg();
                    next_slack += 1;
                    row[next_art] = S::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                RowKind::Eq => {
                    row[next_art] = S::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
            rhs.push(r);
        }
        Tableau { rows, rhs, basis, n_structural: n, art_start }
    }

    fn width(&self) -> usize {
        self.rows.first().map_or(self.art_start, Vec::len)
    }

    /// Reduced-cost row for cost vector `c` (length = width) priced out
    /// over the current basis. Returns (reduced costs, objective value).
    fn price_out(&self, c: &[S]) -> (Vec<S>, S) {
        let width = self.width();
        let mut reduced: Vec<S> = c.to_vec();
        let mut value = S::zero();
        for (i, row) in self.rows.iter().enumerate() {
            let cb = &c[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            for j in 0..width {
                if !row[j].is_zero() {
                    reduced[j] = reduced[j].sub(&cb.mul(&row[j]));
                }
            }
            value = value.add(&cb.mul(&self.rhs[i]));
        }
        (reduced, value)
    }

    /// Runs simplex on the given cost vector. `allow` caps the columns
    /// eligible to enter. Returns Err(()) on pivot-cap exhaustion,
    /// Ok(true) on optimal, Ok(false) on unbounded.
    ///
    /// Pricing starts with Dantzig's rule (most negative reduced cost)
    /// and drops to Bland's rule for good after a long degenerate
    /// stretch, which both breaks cycles and guarantees termination.
    /// The incrementally updated `reduced` row drifts in floating
    /// point, so it is recomputed from `cost` at a fixed cadence.
    fn run(
        &mut self,
        cost: &[S],
        reduced: &mut Vec<S>,
        allow: usize,
        max_pivots: usize,
    ) -> Result<bool, ()> {
        let mut bland = false;
        let mut degenerate_run = 0usize;
        let stall_cap = 64 + self.rows.len();
        for iter in 0..max_pivots {
            if iter > 0 && iter % 128 == 0 {
                *reduced = self.price_out(cost).0;
            }
            let enter = if bland {
                (0..allow).find(|&j| reduced[j].is_neg())
            } else {
                let mut best: Option<usize> = None;
                for j in 0..allow {
                    if reduced[j].is_neg() && best.is_none_or(|b| reduced[j] < reduced[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(enter) = enter else {
                return Ok(true);
            };
            // Ratio test; ties go to the smallest basic variable.
            let mut leave: Option<usize> = None;
            let mut best: Option<S> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][enter];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.rhs[i].div(a);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        ratio < *b
                            || (ratio == *b && self.basis[i] < self.basis[leave.unwrap()])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
            let Some(r) = leave else {
                return Ok(false);
            };
            if self.rhs[r].is_zero() {
                degenerate_run += 1;
                if degenerate_run > stall_cap {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, enter, reduced);
        }
        Err(())
    }

    fn pivot(&mut self, r: usize, enter: usize, reduced: &mut [S]) {
        let width = self.width();
        let inv = S::one().div(&self.rows[r][enter]);
        for j in 0..width {
            self.rows[r][j] = self.rows[r][j].mul(&inv);
        }
        self.rhs[r] = self.rhs[r].mul(&inv);
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][enter].is_zero() {
                continue;
            }
            let factor = self.rows[i][enter].clone();
            for j in 0..width {
                if !self.rows[r][j].is_zero() {
                    self.rows[i][j] = self.rows[i][j].sub(&factor.mul(&self.rows[r][j]));
                }
            }
            self.rows[i][enter] = S::zero();
            self.rhs[i] = self.rhs[i].sub(&factor.mul(&self.rhs[r]));
        }
        if !reduced[enter].is_zero() {
            let factor = reduced[enter].clone();
            for j in 0..width {
                if !self.rows[r][j].is_zero() {
                    reduced[j] = reduced[j].sub(&factor.mul(&self.rows[r][j]));
                }
            }
            reduced[enter] = S::zero();
        }
        self.basis[r] = enter;
    }

    fn solve(mut self, objective: &[S], max_pivots: usize) -> LpOutcome<S> {
        let width = self.width();
        if self.art_start < width {
            // Phase 1: minimize the sum of artificials.
            let mut cost = vec![S::zero(); width];
            for c in cost.iter_mut().skip(self.art_start) {
                *c = S::one();
            }
            let (mut reduced, _) = self.price_out(&cost);
            // The phase-1 objective is bounded below by zero, so an
            // unbounded verdict here can only be rounding noise (a
            // fabricated entering column with no positive ratio); exact
            // arithmetic never lands on it. The current vertex is still
            // the best available answer, so fall through and let the
            // artificial residuals decide feasibility.
            if self.run(&cost, &mut reduced, self.art_start, max_pivots).is_err() {
                return LpOutcome::IterationLimit;
            }
            let infeasible = (0..self.rows.len())
                .any(|i| self.basis[i] >= self.art_start && self.rhs[i].is_pos());
            if infeasible {
                return LpOutcome::Infeasible;
            }
            // Pivot residual artificials out of the basis; rows that
            // offer no pivot column are redundant and get dropped.
            let mut i = 0;
            while i < self.rows.len() {
                if self.basis[i] >= self.art_start {
                    match (0..self.art_start).find(|&j| !self.rows[i][j].is_zero()) {
                        Some(j) => {
                            let mut dummy = vec![S::zero(); self.width()];
                            self.pivot(i, j, &mut dummy);
                        }
                        None => {
                            self.rows.remove(i);
                            self.rhs.remove(i);
                            self.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
            // Artificial columns are dead from here on.
            for row in &mut self.rows {
                row.truncate(self.art_start);
            }
        }
        // Phase 2.
        let width = self.art_start;
        let mut cost = vec![S::zero(); width];
        cost[..self.n_structural].clone_from_slice(&objective[..self.n_structural]);
        let (mut reduced, _) = self.price_out(&cost);
        match self.run(&cost, &mut reduced, width, max_pivots) {
            Err(()) => return LpOutcome::IterationLimit,
            Ok(false) => return LpOutcome::Unbounded,
            Ok(true) => {}
        }
        let mut solution = vec![S::zero(); self.n_structural];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_structural {
                solution[b] = self.rhs[i].clone();
            }
        }
        let objective = solution
            .iter()
            .zip(objective)
            .fold(S::zero(), |acc, (x, c)| acc.add(&x.mul(c)));
        LpOutcome::Optimal { objective, solution }
    }
}
