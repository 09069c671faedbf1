//! Polytopes in halfspace form and their erosion geometry.
//!
//! A [`Polytope`] is the set `{x : A x <= b}`. Eroding it by a norm ball of
//! radius `delta` only moves each offset: row `j` becomes
//! `a_j^T x <= b_j - delta * ||a_j||_*`, where `||.||_*` is the dual of the
//! ball's norm. Everything else in this module (maximum shrinkage, sharpness,
//! the condition constant `K`) is built on that identity plus vertex
//! enumeration and Euclidean projection.
//!
//! Tolerances live in [`GeomConfig`]:
//!
//! | name              | default | meaning                               |
//! |-------------------|---------|---------------------------------------|
//! | `feas`            | 1e-8    | constraint slack accepted as feasible |
//! | `rank`            | 1e-10   | smallest singular value treated as 0  |
//! | `dup`             | 1e-7    | vertex deduplication radius           |
//! | `subset_budget`   | 2e6     | cap on enumerated m-subsets of rows   |
//! | `projection_tol`  | 1e-9    | Dykstra stopping movement             |
//! | `projection_sweeps` | 1e5   | Dykstra sweep budget                  |

mod enumerate;
mod io;
mod projection;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, VarKind};

pub use enumerate::Vertex;

/// Numerical tolerances and budgets for geometry operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomConfig {
    pub feas: f64,
    pub rank: f64,
    pub dup: f64,
    pub subset_budget: u128,
    pub max_dim: usize,
    pub projection_tol: f64,
    pub projection_sweeps: usize,
}

impl Default for GeomConfig {
    fn default() -> Self {
        Self {
            feas: 1e-8,
            rank: 1e-10,
            dup: 1e-7,
            subset_budget: 2_000_000,
            max_dim: 12,
            projection_tol: 1e-9,
            projection_sweeps: 100_000,
        }
    }
}

/// The norm used for the erosion ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormTag {
    L1,
    L2,
    Linf,
}

impl NormTag {
    pub const ALL: [NormTag; 3] = [NormTag::L1, NormTag::L2, NormTag::Linf];

    pub fn dual(self) -> NormTag {
        match self {
            NormTag::L1 => NormTag::Linf,
            NormTag::L2 => NormTag::L2,
            NormTag::Linf => NormTag::L1,
        }
    }

    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormTag::L1 => v.iter().map(|x| x.abs()).sum(),
            NormTag::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormTag::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn dual_norm(self, v: &[f64]) -> f64 {
        self.dual().norm(v)
    }

    /// `max_{||y|| = 1} ||y||_2` in dimension `m`.
    pub fn euclidean_constant(self, m: usize) -> f64 {
        match self {
            NormTag::L1 | NormTag::L2 => 1.0,
            NormTag::Linf => (m as f64).sqrt(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NormTag::L1 => "1",
            NormTag::L2 => "2",
            NormTag::Linf => "inf",
        }
    }

    pub fn parse(s: &str) -> Option<NormTag> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Some(NormTag::L1),
            "2" | "l2" => Some(NormTag::L2),
            "inf" | "linf" | "infinity" => Some(NormTag::Linf),
            _ => None,
        }
    }
}

/// `{x in R^m : A x <= b}` with every row of `A` nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Input(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.ncols() == 0 {
            return Err(Error::Input("polytope dimension must be positive".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite polytope data".into()));
        }
        for (j, row) in a.row_iter().enumerate() {
            if row.norm() <= 0.0 {
                return Err(Error::Input(format!("row {j} of A is zero")));
            }
        }
        Ok(Self { a, b })
    }

    /// Build from row slices: `rows[j] . x <= b[j]`.
    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Input("ragged constraint rows".into()));
        }
        let a = DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
        Self::new(a, DVector::from_row_slice(b))
    }

    /// Axis-aligned box `lower <= x <= upper`.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Result<Self> {
        let m = lower.len();
        if upper.len() != m {
            return Err(Error::Input("box bounds differ in length".into()));
        }
        let mut rows = Vec::with_capacity(2 * m);
        let mut b = Vec::with_capacity(2 * m);
        for i in 0..m {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            rows.push(e.clone());
            b.push(upper[i]);
            e[i] = -1.0;
            rows.push(e);
            b.push(-lower[i]);
        }
        Self::from_rows(&rows, &b)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Ambient dimension `m`.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// Number of halfspaces `p`.
    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.a.row(j).iter().copied().collect()
    }

    fn rows_vec(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|j| self.row(j)).collect()
    }

    /// Largest constraint violation `max_j (a_j x - b_j)`, negative inside.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.n_rows())
            .map(|j| {
                let s: f64 = self.a.row(j).iter().zip(x).map(|(a, v)| a * v).sum();
                s - self.b[j]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }

    /// Dual norms `||a_j||_*` of every row.
    pub fn dual_row_norms(&self, norm: NormTag) -> Vec<f64> {
        (0..self.n_rows())
            .map(|j| norm.dual_norm(&self.row(j)))
            .collect()
    }

    /// Erosion by the closed `norm`-ball of radius `delta`. May be empty.
    pub fn shrink(&self, delta: f64, norm: NormTag) -> Polytope {
        debug_assert!(delta >= 0.0);
        let alpha = self.dual_row_norms(norm);
        let b = DVector::from_fn(self.n_rows(), |j, _| self.b[j] - delta * alpha[j]);
        Polytope {
            a: self.a.clone(),
            b,
        }
    }

    /// Phase-1 feasibility test.
    pub fn is_empty(&self) -> Result<bool> {
        let lp = LinearProgram::new(vec![0.0; self.dim()], self.rows_vec(), self.b.iter().copied().collect());
        match lp.solve()? {
            LpOutcome::Infeasible => Ok(true),
            _ => Ok(false),
        }
    }

    /// True iff the recession cone `{d : A d <= 0}` is `{0}`.
    pub fn is_bounded(&self) -> Result<bool> {
        let m = self.dim();
        let mut rows = self.rows_vec();
        let mut rhs = vec![0.0; self.n_rows()];
        for i in 0..m {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            rows.push(e.clone());
            rhs.push(1.0);
            e[i] = -1.0;
            rows.push(e);
            rhs.push(1.0);
        }
        for i in 0..m {
            for s in [1.0, -1.0] {
                let mut c = vec![0.0; m];
                c[i] = s;
                let lp = LinearProgram::new(c, rows.clone(), rhs.clone());
                match lp.solve()? {
                    LpOutcome::Optimal { value, .. } if value <= 1e-9 => {}
                    _ => return Ok(false),
                }
            }
        }
        Ok(true)
    }

    pub fn ensure_bounded(&self) -> Result<()> {
        if self.is_bounded()? {
            Ok(())
        } else {
            Err(Error::Unbounded)
        }
    }

    /// Largest `delta` for which the erosion is nonempty, together with a
    /// point of the maximally eroded set (a generalized Chebyshev center).
    pub fn max_shrinkage_with_center(&self, norm: NormTag) -> Result<(f64, Vec<f64>)> {
        let m = self.dim();
        let alpha = self.dual_row_norms(norm);
        let rows: Vec<Vec<f64>> = (0..self.n_rows())
            .map(|j| {
                let mut r = self.row(j);
                r.push(alpha[j]);
                r
            })
            .collect();
        let mut c = vec![0.0; m + 1];
        c[m] = 1.0;
        let mut kinds = vec![VarKind::Free; m];
        kinds.push(VarKind::NonNegative);
        let lp = LinearProgram::new(c, rows, self.b.iter().copied().collect()).with_kinds(kinds);
        match lp.solve()? {
            LpOutcome::Optimal { mut x, value } => {
                x.truncate(m);
                Ok((value, x))
            }
            LpOutcome::Infeasible => Err(Error::Empty),
            LpOutcome::Unbounded => Err(Error::Unbounded),
        }
    }

    /// Maximum shrinkage `H` of the polytope under `norm`.
    pub fn max_shrinkage(&self, norm: NormTag) -> Result<f64> {
        self.max_shrinkage_with_center(norm).map(|(h, _)| h)
    }

    /// Nonempty interior iff the maximum shrinkage is positive.
    pub fn has_interior(&self) -> Result<bool> {
        match self.max_shrinkage(NormTag::L2) {
            Ok(h) => Ok(h > 0.0),
            Err(Error::Empty) => Ok(false),
            Err(e) => Err(e),
        }
    }

    pub fn vertices(&self) -> Result<Vec<Vertex>> {
        self.vertices_with(&GeomConfig::default())
    }

    pub fn vertices_with(&self, cfg: &GeomConfig) -> Result<Vec<Vertex>> {
        enumerate::vertices(self, cfg)
    }

    pub fn condition_constant(&self) -> Result<f64> {
        self.condition_constant_with(&GeomConfig::default())
    }

    pub fn condition_constant_with(&self, cfg: &GeomConfig) -> Result<f64> {
        enumerate::condition_constant(self, cfg)
    }

    /// Euclidean projection onto the polytope by Dykstra's method.
    pub fn project(&self, point: &[f64], tol: f64) -> Result<Vec<f64>> {
        let cfg = GeomConfig {
            projection_tol: tol,
            ..GeomConfig::default()
        };
        projection::dykstra(self, point, &cfg)
    }

    pub fn project_with(&self, point: &[f64], cfg: &GeomConfig) -> Result<Vec<f64>> {
        projection::dykstra(self, point, cfg)
    }

    /// Largest pairwise vertex distance.
    pub fn diameter(&self) -> Result<f64> {
        let verts = self.vertices()?;
        Ok(diameter_of(&verts))
    }

    pub fn sharpness(&self, delta: f64, norm: NormTag) -> Result<f64> {
        self.sharpness_with(delta, norm, &GeomConfig::default())
    }

    /// `max_{x in D} min_{y in D_delta} ||x - y||_2`, evaluated at the vertices
    /// of `D` since the inner distance is convex in `x`.
    pub fn sharpness_with(&self, delta: f64, norm: NormTag, cfg: &GeomConfig) -> Result<f64> {
        let h = self.max_shrinkage(norm)?;
        let verts = self.vertices_with(cfg)?;
        self.sharpness_at(delta, norm, h, &verts, cfg)
    }

    fn sharpness_at(
        &self,
        delta: f64,
        norm: NormTag,
        h: f64,
        verts: &[Vertex],
        cfg: &GeomConfig,
    ) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(Error::Domain(format!("shrinkage {delta} must be nonnegative")));
        }
        if delta > h * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::Domain(format!(
                "shrinkage {delta} exceeds the maximum shrinkage {h}"
            )));
        }
        if delta == 0.0 {
            return Ok(0.0);
        }
        let shrunk = self.shrink(delta.min(h), norm);
        let mut worst: f64 = 0.0;
        for v in verts {
            let y = projection::dykstra(&shrunk, &v.point, cfg)?;
            let dist = v
                .point
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(dist);
        }
        Ok(worst)
    }

    /// `n_points` evenly spaced samples of the sharpness on `[0, H]`.
    pub fn sharpness_curve(&self, norm: NormTag, n_points: usize) -> Result<Vec<(f64, f64)>> {
        let cfg = GeomConfig::default();
        if n_points == 0 {
            return Ok(Vec::new());
        }
        let h = self.max_shrinkage(norm)?;
        let verts = self.vertices_with(&cfg)?;
        (0..n_points)
            .map(|k| {
                let delta = if n_points == 1 {
                    0.0
                } else {
                    h * k as f64 / (n_points - 1) as f64
                };
                self.sharpness_at(delta, norm, h, &verts, &cfg)
                    .map(|s| (delta, s))
            })
            .collect()
    }

    /// Every vertex of `inner` lies in `self` (so `inner ⊆ self` for bounded `inner`).
    pub fn contains_polytope(&self, inner: &Polytope, tol: f64) -> Result<bool> {
        Ok(inner
            .vertices()?
            .iter()
            .all(|v| self.contains(&v.point, tol)))
    }
}

pub fn diameter_of(verts: &[Vertex]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, u) in verts.iter().enumerate() {
        for v in &verts[i + 1..] {
            let d = u
                .point
                .iter()
                .zip(&v.point)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            best = best.max(d);
        }
    }
    best
}
