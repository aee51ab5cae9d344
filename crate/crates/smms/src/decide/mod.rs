//! Decision procedure for almost-sure ε-reachability.
//!
//! A system is almost-surely ε-reachable (over bounded, path-connected, open
//! safety sets) exactly when every nonzero direction has some mode mean with
//! positive projection. That holds iff the means span the whole space and
//! admit a combination `sum alpha_i mean_i = 0` with every `alpha_i >= 1`;
//! both halves are decided here in exact rational arithmetic and returned
//! with machine-checkable certificates:
//!
//! - YES: the multipliers `alpha` (re-checkable by an exact sum);
//! - NO: a direction `w != 0` with `mean_i · w <= 0` for every mode, from
//!   either the null space of the means (rank deficiency) or the Farkas dual
//!   of the infeasible multiplier program.

mod lambda;

pub use lambda::{compute_lambda, LambdaBound, LambdaMethod, MethodChoice};

use crate::model::{expected_system, ExpectedSystem, Smms};
use crate::rational::{dot, is_zero_vec, zero_vec, Rational};
use crate::simplex::{solve_standard, LpResult};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecideError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no vectors given")]
    Empty,
    #[error("means do not positively span the space; no positive lambda exists")]
    NotPositivelySpanning,
    #[error("exact lambda computation is only available for dimensions 1-3")]
    UnsupportedDimension { dim: usize },
    #[error("invalid ordering: need 0 < x_t < x_t + eps < x_s < b")]
    InvalidOrdering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
}

/// Witness for YES: `alpha_i >= 1` with `sum alpha_i mean_i = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanCertificate {
    pub alpha: Vec<Rational>,
}

/// Witness for NO: `w != 0` with `mean_i · w <= 0` for every mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolatingDirection {
    pub w: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    Span(SpanCertificate),
    Violation(ViolatingDirection),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionResult {
    pub verdict: Verdict,
    pub certificate: Certificate,
}

impl DecisionResult {
    pub fn is_yes(&self) -> bool {
        self.verdict == Verdict::Yes
    }

    pub fn witness(&self) -> Option<&ViolatingDirection> {
        match &self.certificate {
            Certificate::Violation(v) => Some(v),
            Certificate::Span(_) => None,
        }
    }
}

/// Outcome of the multiplier feasibility program, with the simplex pivot
/// count for complexity checks.
#[derive(Debug, Clone)]
pub struct SpanOutcome {
    pub feasibility: SpanFeasibility,
    pub simplex_iterations: usize,
}

#[derive(Debug, Clone)]
pub enum SpanFeasibility {
    Feasible(SpanCertificate),
    Infeasible(ViolatingDirection),
}

fn check_common_dimension(vectors: &[Vec<Rational>], dim: usize) -> Result<(), DecideError> {
    if vectors.is_empty() {
        return Err(DecideError::Empty);
    }
    for v in vectors {
        if v.len() != dim {
            return Err(DecideError::DimensionMismatch { expected: dim, got: v.len() });
        }
    }
    Ok(())
}

/// Exact rank of the set of vectors, via fraction-free (Bareiss)
/// elimination on the denominator-cleared integer matrix.
pub fn rank_rational(vectors: &[Vec<Rational>], dim: usize) -> Result<usize, DecideError> {
    check_common_dimension(vectors, dim)?;
    let mut m: Vec<Vec<BigInt>> = vectors
        .iter()
        .map(|v| {
            let lcm = v
                .iter()
                .map(|x| x.denom().clone())
                .fold(BigInt::one(), |acc, d| num_integer::lcm(acc, d));
            v.iter()
                .map(|x| x.numer() * (&lcm / x.denom()))
                .collect()
        })
        .collect();

    let rows = m.len();
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..dim {
        let Some(pivot_row) = (rank..rows).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot_row);
        let pivot = m[rank][col].clone();
        for i in rank + 1..rows {
            for j in col + 1..dim {
                let v = &pivot * &m[i][j] - &m[i][col] * &m[rank][j];
                m[i][j] = &v / &prev;
            }
            m[i][col] = BigInt::zero();
        }
        prev = pivot;
        rank += 1;
        if rank == rows.min(dim) {
            break;
        }
    }
    Ok(rank)
}

/// A nonzero vector orthogonal to every input vector. Exists iff the
/// vectors do not span the space.
fn orthogonal_witness(vectors: &[Vec<Rational>], dim: usize) -> Option<Vec<Rational>> {
    // Reduced row echelon form of the vectors-as-rows matrix; a free column
    // yields a null-space direction of the row space's orthogonal
    // complement, i.e. w with v·w = 0 for every input row v.
    let mut m: Vec<Vec<Rational>> = vectors.to_vec();
    let rows = m.len();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..dim {
        let Some(pr) = (r..rows).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(r, pr);
        let pivot = m[r][col].clone();
        for v in m[r].iter_mut() {
            *v /= &pivot;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[col].is_zero() {
                let f = row[col].clone();
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= &f * p;
                }
            }
        }
        pivot_cols.push(col);
        r += 1;
        if r == rows {
            break;
        }
    }
    let free = (0..dim).find(|c| !pivot_cols.contains(c))?;
    let mut w = zero_vec(dim);
    w[free] = Rational::one();
    for (row, &pc) in pivot_cols.iter().enumerate() {
        w[pc] = -m[row][free].clone();
    }
    Some(w)
}

/// Feasibility of `sum alpha_i v_i = 0` with `alpha_i >= 1`, solved as a
/// phase-1 simplex over `beta = alpha - 1 >= 0`. Infeasibility converts the
/// Farkas dual into a violating direction.
pub fn positive_span_feasible(vectors: &[Vec<Rational>]) -> Result<SpanOutcome, DecideError> {
    let dim = vectors.first().map(Vec::len).unwrap_or(0);
    check_common_dimension(vectors, dim)?;
    let count = vectors.len();

    // M beta = -sum v_i, with M's columns the vectors.
    let a: Vec<Vec<Rational>> = (0..dim)
        .map(|row| vectors.iter().map(|v| v[row].clone()).collect())
        .collect();
    let mut b = zero_vec(dim);
    for v in vectors {
        for (acc, x) in b.iter_mut().zip(v) {
            *acc -= x;
        }
    }
    let cost = zero_vec(count);
    let sol = solve_standard(&a, &b, &cost);

    let feasibility = match sol.result {
        LpResult::Optimal { x: beta, .. } => {
            let alpha: Vec<Rational> = beta.iter().map(|bi| bi + Rational::one()).collect();
            let mut sum = zero_vec(dim);
            for (ai, v) in alpha.iter().zip(vectors) {
                for (acc, x) in sum.iter_mut().zip(v) {
                    *acc += ai * x;
                }
            }
            debug_assert!(is_zero_vec(&sum), "simplex returned a non-certificate");
            SpanFeasibility::Feasible(SpanCertificate { alpha })
        }
        LpResult::Infeasible { farkas } => {
            debug_assert!(vectors.iter().all(|v| !dot(v, &farkas).is_positive()));
            SpanFeasibility::Infeasible(ViolatingDirection { w: farkas })
        }
        LpResult::Unbounded => unreachable!("feasibility program has constant objective"),
    };
    Ok(SpanOutcome { feasibility, simplex_iterations: sol.iterations })
}

/// The polynomial-time decision procedure: YES iff the means have full rank
/// and the multiplier program is feasible.
pub fn is_almost_sure_reachable(m: &Smms) -> DecisionResult {
    let es = expected_system(m);
    decide_expected(&es)
}

/// Same decision over an already-computed expected system.
pub fn decide_expected(es: &ExpectedSystem) -> DecisionResult {
    let n = es.dim;
    let rank = rank_rational(&es.means, n).expect("expected system is well-formed");
    if rank < n {
        let w = orthogonal_witness(&es.means, n)
            .expect("rank-deficient system has an orthogonal direction");
        return DecisionResult {
            verdict: Verdict::No,
            certificate: Certificate::Violation(ViolatingDirection { w }),
        };
    }
    let outcome = positive_span_feasible(&es.means).expect("expected system is well-formed");
    match outcome.feasibility {
        SpanFeasibility::Feasible(cert) => DecisionResult {
            verdict: Verdict::Yes,
            certificate: Certificate::Span(cert),
        },
        SpanFeasibility::Infeasible(witness) => DecisionResult {
            verdict: Verdict::No,
            certificate: Certificate::Violation(witness),
        },
    }
}

/// Independent certificate checker: re-derives every claimed property from
/// the expected system alone.
pub fn verify_certificate(es: &ExpectedSystem, result: &DecisionResult) -> bool {
    match (&result.verdict, &result.certificate) {
        (Verdict::Yes, Certificate::Span(SpanCertificate { alpha })) => {
            if alpha.len() != es.means.len() {
                return false;
            }
            if alpha.iter().any(|a| *a < Rational::one()) {
                return false;
            }
            let mut sum = zero_vec(es.dim);
            for (a, v) in alpha.iter().zip(&es.means) {
                for (acc, x) in sum.iter_mut().zip(v) {
                    *acc += a * x;
                }
            }
            if !is_zero_vec(&sum) {
                return false;
            }
            rank_rational(&es.means, es.dim) == Ok(es.dim)
        }
        (Verdict::No, Certificate::Violation(ViolatingDirection { w })) => {
            if w.len() != es.dim || is_zero_vec(w) {
                return false;
            }
            es.means.iter().all(|m| !dot(m, w).is_positive())
        }
        _ => false,
    }
}

/// Upper bound on the reach probability of any causal policy when no mode
/// has negative mean: `(b - x_s) / (b - (x_t + eps))`, on the interval
/// `(0, b)` with target left of start.
pub fn necessity_bound(b: f64, x_s: f64, x_t: f64, eps: f64) -> Result<f64, DecideError> {
    if !(0.0 < x_t && x_t < x_t + eps && x_t + eps < x_s && x_s < b) {
        return Err(DecideError::InvalidOrdering);
    }
    Ok((b - x_s) / (b - (x_t + eps)))
}
