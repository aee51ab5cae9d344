//! Dense two-phase simplex over exact rationals.
//!
//! Small and exact rather than sparse and fast: the systems solved here have
//! at most a few dozen rows (mode counts, polytope faces), and the decision
//! procedure needs exact zero tests that floating point cannot provide.
//! Bland's rule everywhere, so the iteration count is finite and bounded by
//! the number of bases.
//!
//! Infeasibility comes with a Farkas certificate: for `Ax = b, x >= 0`
//! infeasible, a vector `y` with `y·A_j <= 0` for every column and
//! `y·b > 0`.

use crate::rational::Rational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { x: Vec<Rational>, objective: Rational },
    Infeasible { farkas: Vec<Rational> },
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub result: LpResult,
    pub iterations: usize,
}

struct Tableau {
    /// m x (cols + 1) matrix; last column is the rhs.
    rows: Vec<Vec<Rational>>,
    /// Reduced-cost row, same width; last entry is the negated objective.
    obj: Vec<Rational>,
    /// Basic variable per row.
    basis: Vec<usize>,
    cols: usize,
    iterations: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rational {
        &self.rows[i][self.cols]
    }

    /// One Bland pivot. `Ok(false)` at optimality, `Err(())` when the
    /// entering column has no blocking row (objective unbounded).
    fn pivot_step(&mut self, allowed: usize) -> Result<bool, ()> {
        let entering = (0..allowed).find(|&j| self.obj[j].is_negative());
        let Some(e) = entering else { return Ok(false) };

        let mut leave: Option<usize> = None;
        let mut best: Option<Rational> = None;
        for i in 0..self.rows.len() {
            if self.rows[i][e].is_positive() {
                let ratio = self.rhs(i) / &self.rows[i][e];
                let better = match &best {
                    None => true,
                    Some(b) => {
                        ratio < *b || (ratio == *b && self.basis[i] < self.basis[leave.unwrap()])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        let Some(l) = leave else { return Err(()) };
        self.pivot(l, e);
        Ok(true)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        self.iterations += 1;
        let pivot = self.rows[row][col].clone();
        for v in self.rows[row].iter_mut() {
            *v /= &pivot;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row || r[col].is_zero() {
                continue;
            }
            let factor = r[col].clone();
            for (v, p) in r.iter_mut().zip(&pivot_row) {
                *v -= &factor * p;
            }
        }
        if !self.obj[col].is_zero() {
            let factor = self.obj[col].clone();
            for (v, p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= &factor * p;
            }
        }
        self.basis[row] = col;
    }

    fn run(&mut self, allowed: usize) -> Result<(), ()> {
        while self.pivot_step(allowed)? {}
        Ok(())
    }
}

/// Minimize `c·x` subject to `A x = b`, `x >= 0`.
pub fn solve_standard(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> LpSolution {
    let m = a.len();
    let n = c.len();
    debug_assert_eq!(b.len(), m);
    debug_assert!(a.iter().all(|row| row.len() == n));

    // Phase 1: scale rows to non-negative rhs, add artificials, minimize
    // their sum.
    let mut sign = vec![Rational::one(); m];
    let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row: Vec<Rational> = Vec::with_capacity(n + m + 1);
        let s = if b[i].is_negative() {
            sign[i] = -Rational::one();
            -Rational::one()
        } else {
            Rational::one()
        };
        for j in 0..n {
            row.push(&s * &a[i][j]);
        }
        for k in 0..m {
            row.push(if k == i { Rational::one() } else { Rational::zero() });
        }
        row.push(&s * &b[i]);
        rows.push(row);
    }

    // Reduced costs under the artificial basis: structural columns get the
    // negated row sums, artificials zero, and the objective cell -(sum b).
    let mut obj = vec![Rational::zero(); n + m + 1];
    for row in &rows {
        for (o, v) in obj.iter_mut().zip(row) {
            *o -= v;
        }
    }
    for o in obj.iter_mut().take(n + m).skip(n) {
        *o = Rational::zero();
    }

    let mut t = Tableau {
        rows,
        obj,
        basis: (n..n + m).collect(),
        cols: n + m,
        iterations: 0,
    };
    // Phase-1 objective is bounded below by zero, so this cannot fail.
    t.run(n + m).expect("phase-1 simplex cannot be unbounded");

    let phase1_obj = -t.obj[t.cols].clone();
    if phase1_obj.is_positive() {
        // Farkas dual in the original row space: y_i = s_i (1 - r_i) with
        // r_i the reduced cost of artificial i at optimality.
        let farkas: Vec<Rational> = (0..m)
            .map(|i| &sign[i] * (Rational::one() - &t.obj[n + i]))
            .collect();
        return LpSolution {
            result: LpResult::Infeasible { farkas },
            iterations: t.iterations,
        };
    }

    // Drive leftover artificials out of the basis; rows with no structural
    // pivot are redundant and dropped.
    let mut drop_rows: Vec<usize> = Vec::new();
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !t.rows[i][j].is_zero()) {
                t.pivot(i, j);
            } else {
                drop_rows.push(i);
            }
        }
    }
    for &i in drop_rows.iter().rev() {
        t.rows.remove(i);
        t.basis.remove(i);
    }

    // Phase 2 over structural columns only.
    let mut obj = vec![Rational::zero(); t.cols + 1];
    obj[..n].clone_from_slice(c);
    for (i, row) in t.rows.iter().enumerate() {
        let cb = c[t.basis[i]].clone();
        if !cb.is_zero() {
            for (o, v) in obj.iter_mut().zip(row) {
                *o -= &cb * v;
            }
        }
    }
    t.obj = obj;

    if t.run(n).is_err() {
        return LpSolution {
            result: LpResult::Unbounded,
            iterations: t.iterations,
        };
    }

    let mut x = vec![Rational::zero(); n];
    for (i, &bj) in t.basis.iter().enumerate() {
        if bj < n {
            x[bj] = t.rhs(i).clone();
        }
    }
    let objective = crate::rational::dot(c, &x);
    LpSolution {
        result: LpResult::Optimal { x, objective },
        iterations: t.iterations,
    }
}

/// Maximize `c·x` subject to `A x <= b` with `x` free. Free variables are
/// split into positive and negative parts and a slack is added per row.
pub fn maximize_ineq(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> LpSolution {
    let m = a.len();
    let n = c.len();
    let cols = 2 * n + m;
    let mut sa: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(cols);
        for j in 0..n {
            row.push(a[i][j].clone());
        }
        for j in 0..n {
            row.push(-&a[i][j]);
        }
        for k in 0..m {
            row.push(if k == i { Rational::one() } else { Rational::zero() });
        }
        sa.push(row);
    }
    let mut sc = vec![Rational::zero(); cols];
    for j in 0..n {
        sc[j] = -&c[j];
        sc[n + j] = c[j].clone();
    }
    let sol = solve_standard(&sa, b, &sc);
    let result = match sol.result {
        LpResult::Optimal { x, objective } => {
            let orig: Vec<Rational> = (0..n).map(|j| &x[j] - &x[n + j]).collect();
            LpResult::Optimal { x: orig, objective: -objective }
        }
        other => other,
    };
    LpSolution { result, iterations: sol.iterations }
}
