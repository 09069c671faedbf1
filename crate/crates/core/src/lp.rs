//! Dense two-phase simplex for small linear programs.
//!
//! Problems have the shape `maximize c^T x  s.t.  A x <= b`, where each
//! variable is either free or sign-constrained to be nonnegative. Free
//! variables are split into a positive and negative part. Pivoting follows
//! Bland's rule, so the method terminates on degenerate problems.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Free,
    NonNegative,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub kinds: Vec<VarKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    /// All variables free.
    pub fn new(objective: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Self {
        let kinds = vec![VarKind::Free; objective.len()];
        Self {
            objective,
            rows,
            rhs,
            kinds,
        }
    }

    pub fn with_kinds(mut self, kinds: Vec<VarKind>) -> Self {
        self.kinds = kinds;
        self
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.objective.len();
        if self.kinds.len() != n {
            return Err(Error::Input("variable kinds do not match objective".into()));
        }
        if self.rows.len() != self.rhs.len() || self.rows.iter().any(|r| r.len() != n) {
            return Err(Error::Input("constraint matrix shape mismatch".into()));
        }
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// Constraint rows; last entry of each row is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Column index -> (original variable, sign) for structural columns.
    structural: Vec<(usize, f64)>,
    n_struct: usize,
    n_slack: usize,
    n_art: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let mut structural = Vec::new();
        for (j, kind) in lp.kinds.iter().enumerate() {
            structural.push((j, 1.0));
            if *kind == VarKind::Free {
                structural.push((j, -1.0));
            }
        }
        let n_struct = structural.len();
        let m = lp.rows.len();
        let n_art = lp.rhs.iter().filter(|b| **b < 0.0).count();
        let width = n_struct + m + n_art + 1;

        let mut t = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_art = n_struct + m;
        for (i, (row, &b)) in lp.rows.iter().zip(&lp.rhs).enumerate() {
            let mut r = vec![0.0; width];
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            for (c, &(j, s)) in structural.iter().enumerate() {
                r[c] = sign * s * row[j];
            }
            r[n_struct + i] = sign;
            r[width - 1] = sign * b;
            if b < 0.0 {
                r[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            } else {
                basis.push(n_struct + i);
            }
            t.push(r);
        }
        Self {
            t,
            basis,
            structural,
            n_struct,
            n_slack: m,
            n_art,
        }
    }

    fn width(&self) -> usize {
        self.n_struct + self.n_slack + self.n_art + 1
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.n_struct + self.n_slack && col < self.width() - 1
    }

    /// Reduced-cost row for cost vector `c` (indexed by tableau column).
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut r = vec![0.0; w];
        r[..w - 1].copy_from_slice(&c[..w - 1]);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = c[b];
            if cb != 0.0 {
                for (rj, tj) in r.iter_mut().zip(&self.t[i]) {
                    *rj -= cb * tj;
                }
            }
        }
        r
    }

    fn pivot(&mut self, row: usize, col: usize, obj: &mut [f64]) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (rj, pj) in r.iter_mut().zip(&pivot_row) {
                    *rj -= f * pj;
                }
                r[col] = 0.0;
            }
        }
        let f = obj[col];
        if f != 0.0 {
            for (oj, pj) in obj.iter_mut().zip(&pivot_row) {
                *oj -= f * pj;
            }
            obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Run simplex iterations with Bland's rule; `Ok(false)` on unboundedness.
    fn optimize(&mut self, obj: &mut [f64], allow_artificial: bool) -> Result<bool> {
        let w = self.width();
        for _ in 0..MAX_PIVOTS {
            let enter = (0..w - 1)
                .filter(|&j| allow_artificial || !self.is_artificial(j))
                .find(|&j| obj[j] > PIVOT_EPS);
            let Some(col) = enter else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, r) in self.t.iter().enumerate() {
                let a = r[col];
                if a > PIVOT_EPS {
                    let ratio = r[w - 1] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 * br.abs().max(1.0)
                                || ((ratio - br).abs() <= 1e-12 * br.abs().max(1.0)
                                    && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Ok(false);
            };
            self.pivot(row, col, obj);
        }
        Err(Error::Nonconvergence {
            what: "simplex",
            iterations: MAX_PIVOTS,
            residual: f64::NAN,
            last: Vec::new(),
        })
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpOutcome> {
        let w = self.width();
        if self.n_art > 0 {
            let mut c1 = vec![0.0; w];
            for (j, c) in c1.iter_mut().enumerate().take(w - 1) {
                if self.is_artificial(j) {
                    *c = -1.0;
                }
            }
            let mut obj = self.reduced_costs(&c1);
            self.optimize(&mut obj, true)?;
            let infeasibility: f64 = self
                .basis
                .iter()
                .zip(&self.t)
                .filter(|(b, _)| self.is_artificial(**b))
                .map(|(_, r)| r[w - 1])
                .sum();
            let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
            if infeasibility > 1e-9 * scale {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive remaining (zero-valued) artificials out of the basis.
            let mut i = 0;
            while i < self.t.len() {
                if self.is_artificial(self.basis[i]) {
                    let col = (0..self.n_struct + self.n_slack)
                        .find(|&j| self.t[i][j].abs() > 1e-9);
                    match col {
                        Some(j) => {
                            let mut dummy = vec![0.0; w];
                            self.pivot(i, j, &mut dummy);
                            i += 1;
                        }
                        None => {
                            self.t.remove(i);
                            self.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }

        let mut c2 = vec![0.0; w];
        for (col, &(j, s)) in self.structural.iter().enumerate() {
            c2[col] = s * lp.objective[j];
        }
        let mut obj = self.reduced_costs(&c2);
        if !self.optimize(&mut obj, false)? {
            return Ok(LpOutcome::Unbounded);
        }

        let mut x = vec![0.0; lp.objective.len()];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                let (j, s) = self.structural[b];
                x[j] += s * self.t[i][w - 1];
            }
        }
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}
