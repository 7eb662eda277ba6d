//! Sign-cell enumeration over gap space for the exact cluster solver.
//!
//! Fix an ordering of the `b` cluster positions and write them as
//! prefix sums of positive gaps `g_1 … g_{b-1}` normalized to sum 1.
//! Every distance comparison then reduces to the sign of a linear form
//! in the gaps. Comparisons whose pivot lies outside the compared pair
//! are decided by the ordering alone; the only forms with a free sign
//! are the "sandwich" forms — pivot strictly between the pair — of the
//! shape `(left distance) − (right distance)`. Crucially these forms
//! depend only on the three *positions* involved, not on which labels
//! sit there, so the arrangement of all `C(b,3)` sandwich forms inside
//! the gap simplex is shared by every ordering and is enumerated once
//! per `b`.
//!
//! Enumeration is a depth-first sign split: a witness point is carried
//! along, each new form either keeps the witness (nonzero sign) or
//! both sides are probed with an exact max-slack rational LP whose
//! optimum certifies whether the open region is nonempty. Every
//! full-dimensional cell is therefore visited exactly once, with exact
//! arithmetic end to end.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use itertools::Itertools;
use num::BigRational;

use crate::simplex::{LpOutcome, LpProblem, Scalar};

/// Hard ceiling for exact cell enumeration; beyond this the cell count
/// (times `b!` orderings) stops being desk-scale.
pub(crate) const MAX_EXACT_B: usize = 6;

/// A sandwich form, identified by the three ordering positions
/// `left < mid < right`; its value is (distance mid−left) minus
/// (distance right−mid), positive exactly when the right point is the
/// closer one to the middle point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Form {
    pub left: usize,
    pub mid: usize,
    pub right: usize,
}

pub(crate) struct Arrangement {
    pub b: usize,
    /// Sorted by `(mid, left, right)`; bit `f` of a sign word refers to
    /// `forms[f]`, set when the form is positive.
    pub forms: Vec<Form>,
    /// One sign word per open cell of the gap-space arrangement.
    pub cells: Vec<u32>,
    /// All orderings of `0..b` in lexicographic order; the index is the
    /// ordering's rank.
    pub orderings: Vec<Vec<usize>>,
}

impl Arrangement {
    /// Index of the form at the given positions, if it is a sandwich.
    pub fn form_index(&self, left: usize, mid: usize, right: usize) -> usize {
        self.forms
            .binary_search_by_key(&(mid, left, right), |f| (f.mid, f.left, f.right))
            .expect("positions describe a sandwich form")
    }
}

fn rational(v: i64) -> BigRational {
    <BigRational as Scalar>::from_int(v)
}

fn enumerate_forms(b: usize) -> Vec<Form> {
    let mut forms = Vec::new();
    for mid in 0..b {
        for left in 0..mid {
            for right in (mid + 1)..b {
                forms.push(Form { left, mid, right });
            }
        }
    }
    forms.sort_by_key(|f| (f.mid, f.left, f.right));
    forms
}

/// Gap coefficients of a form: gap `t` separates positions `t` and
/// `t + 1`.
fn form_coeffs(b: usize, f: Form) -> Vec<i64> {
    let mut c = vec![0i64; b - 1];
    for t in f.left..f.mid {
        c[t] += 1;
    }
    for t in f.mid..f.right {
        c[t] -= 1;
    }
    c
}

fn eval_form(coeffs: &[i64], gaps: &[BigRational]) -> BigRational {
    let mut acc = <BigRational as Scalar>::zero();
    for (c, g) in coeffs.iter().zip(gaps) {
        if *c != 0 {
            acc = acc.add(&rational(*c).mul(g));
        }
    }
    acc
}

/// Max-slack LP for a sign-prefix: variables are the gaps plus one
/// slack `t`, maximizing `t` subject to the simplex equality, `g ≥ t`,
/// and `sign · form ≥ t` for every fixed form. Returns a strictly
/// interior witness when the open region is nonempty.
fn open_witness(
    b: usize,
    coeffs: &[Vec<i64>],
    word: u32,
    upto: usize,
) -> Option<Vec<BigRational>> {
    let gaps = b - 1;
    let mut lp = LpProblem::<BigRational>::new(gaps + 1);
    let mut objective = vec![rational(0); gaps + 1];
    objective[gaps] = rational(-1);
    lp.set_objective(objective);
    let mut simplex_row = vec![rational(1); gaps + 1];
    simplex_row[gaps] = rational(0);
    lp.add_eq(simplex_row, rational(1));
    for t in 0..gaps {
        let mut row = vec![rational(0); gaps + 1];
        row[t] = rational(1);
        row[gaps] = rational(-1);
        lp.add_ge(row, rational(0));
    }
    for (f, c) in coeffs.iter().enumerate().take(upto) {
        let sign: i64 = if word >> f & 1 == 1 { 1 } else { -1 };
        let mut row: Vec<BigRational> = c.iter().map(|&v| rational(sign * v)).collect();
        row.push(rational(-1));
        lp.add_ge(row, rational(0));
    }
    match lp.solve(100_000) {
        LpOutcome::Optimal { objective, mut solution } => {
            if objective.is_neg() {
                solution.truncate(gaps);
                Some(solution)
            } else {
                None
            }
        }
        LpOutcome::Infeasible => None,
        other => panic!("max-slack LP cannot be unbounded or stall: {other:?}"),
    }
}

fn split(
    depth: usize,
    word: u32,
    witness: Vec<BigRational>,
    coeffs: &[Vec<i64>],
    b: usize,
    cells: &mut Vec<u32>,
) {
    if depth == coeffs.len() {
        cells.push(word);
        return;
    }
    let value = eval_form(&coeffs[depth], &witness);
    let zero = <BigRational as Scalar>::zero();
    let bit = 1u32 << depth;
    if value > zero {
        if let Some(w) = open_witness(b, coeffs, word, depth + 1) {
            split(depth + 1, word, w, coeffs, b, cells);
        }
        split(depth + 1, word | bit, witness, coeffs, b, cells);
    } else if value < zero {
        if let Some(w) = open_witness(b, coeffs, word | bit, depth + 1) {
            split(depth + 1, word | bit, w, coeffs, b, cells);
        }
        split(depth + 1, word, witness, coeffs, b, cells);
    } else {
        if let Some(w) = open_witness(b, coeffs, word, depth + 1) {
            split(depth + 1, word, w, coeffs, b, cells);
        }
        if let Some(w) = open_witness(b, coeffs, word | bit, depth + 1) {
            split(depth + 1, word | bit, w, coeffs, b, cells);
        }
    }
}

fn build(b: usize) -> Arrangement {
    assert!((2..=MAX_EXACT_B).contains(&b), "cluster count out of range");
    let forms = enumerate_forms(b);
    let coeffs: Vec<Vec<i64>> = forms.iter().map(|&f| form_coeffs(b, f)).collect();
    let gaps = b - 1;
    let uniform: Vec<BigRational> =
        (0..gaps).map(|_| BigRational::new(1.into(), (gaps as i64).into())).collect();
    let mut cells = Vec::new();
    split(0, 0, uniform, &coeffs, b, &mut cells);
    cells.sort_unstable();
    debug_assert!(cells.windows(2).all(|w| w[0] < w[1]), "cells are sign-distinct");
    let orderings: Vec<Vec<usize>> = (0..b).permutations(b).collect();
    Arrangement { b, forms, cells, orderings }
}

static CACHE: LazyLock<Mutex<HashMap<usize, Arc<Arrangement>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// The shared arrangement for `b` clusters, built on first use.
pub(crate) fn arrangement(b: usize) -> Arc<Arrangement> {
    let mut cache = CACHE.lock().expect("arrangement cache poisoned");
    Arc::clone(cache.entry(b).or_insert_with(|| Arc::new(build(b))))
}

/// Exact gap witness for one cell, strictly interior to every sign
/// constraint; panics if the word does not describe a nonempty open
/// cell of this arrangement.
pub(crate) fn cell_witness(arr: &Arrangement, word: u32) -> Vec<BigRational> {
    let coeffs: Vec<Vec<i64>> = arr.forms.iter().map(|&f| form_coeffs(arr.b, f)).collect();
    open_witness(arr.b, &coeffs, word, coeffs.len()).expect("cell is open and nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_clusters_have_two_cells() {
        let arr = arrangement(3);
        assert_eq!(arr.forms, vec![Form { left: 0, mid: 1, right: 2 }]);
        assert_eq!(arr.cells, vec![0, 1]);
        assert_eq!(arr.orderings.len(), 6);
    }

    #[test]
    fn witnesses_reproduce_their_sign_words() {
        for b in 2..=5 {
            let arr = arrangement(b);
            let coeffs: Vec<Vec<i64>> =
                arr.forms.iter().map(|&f| form_coeffs(b, f)).collect();
            for &word in &arr.cells {
                let w = cell_witness(&arr, word);
                let total = w.iter().fold(<BigRational as Scalar>::zero(), |a, g| a.add(g));
                assert_eq!(total, rational(1));
                let zero = <BigRational as Scalar>::zero();
                assert!(w.iter().all(|g| *g > zero), "witness strictly inside the simplex");
                for (f, c) in coeffs.iter().enumerate() {
                    let v = eval_form(c, &w);
                    let expect_positive = word >> f & 1 == 1;
                    assert_eq!(v > zero, expect_positive, "b={b} word={word:#b} form {f}");
                    assert_ne!(v, zero);
                }
            }
        }
    }

    #[test]
    fn integer_gap_probes_land_in_enumerated_cells() {
        // Scale-invariance lets us probe with raw integer gap vectors.
        let b = 4;
        let arr = arrangement(b);
        let coeffs: Vec<Vec<i64>> = arr.forms.iter().map(|&f| form_coeffs(b, f)).collect();
        let mut probed = std::collections::HashSet::new();
        for g0 in 1..=5i64 {
            for g1 in 1..=5i64 {
                'probe: for g2 in 1..=5i64 {
                    let gaps = [g0, g1, g2];
                    let mut word = 0u32;
                    for (f, c) in coeffs.iter().enumerate() {
                        let v: i64 = c.iter().zip(&gaps).map(|(a, b)| a * b).sum();
                        if v == 0 {
                            continue 'probe; // boundary probe, no open cell
                        }
                        if v > 0 {
                            word |= 1 << f;
                        }
                    }
                    assert!(
                        arr.cells.binary_search(&word).is_ok(),
                        "probe {gaps:?} → {word:#b} missing"
                    );
                    probed.insert(word);
                }
            }
        }
        // The probe grid is crude but must still see several cells.
        assert!(probed.len() >= arr.cells.len() / 2, "grid saw {} cells", probed.len());
    }

    #[test]
    fn form_index_round_trips() {
        let arr = arrangement(5);
        for (i, f) in arr.forms.iter().enumerate() {
            assert_eq!(arr.form_index(f.left, f.mid, f.right), i);
        }
    }
}
