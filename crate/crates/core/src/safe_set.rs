//! Conservative safe action sets for polytopic safety sets.
//!
//! The safety set is `E = {y : F y <= g}`. Because the confidence set is a
//! product of per-row ellipsoids, the worst case of row `j` of `F Theta x`
//! separates across rows of `Theta`:
//!
//! ```text
//! sup_{Theta in C_t} F_j Theta x = F_j Theta_hat x + sqrt(beta_t) ||x||_{V_t^{-1}} sum_i |F_ji|
//! ```
//!
//! and over the initial set `C_0 = {||theta^i||_2 <= S}` the same sup is
//! `S ||x||_2 sum_i |F_ji|`. Membership in `G_t` / `G_0` is therefore a
//! closed-form test with no inner optimization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimation::ConfidenceState;
use crate::geometry::Polytope;
use crate::linalg::{dot, norm2, quad_form};

/// `E = {y in R^n : F y <= g}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyPolytope {
    poly: Polytope,
    /// `sum_i |F_ji|` per row.
    abs_row_sums: Vec<f64>,
}

impl SafetyPolytope {
    /// Wraps a polytope after checking that it is bounded with nonempty interior.
    pub fn new(poly: Polytope) -> Result<Self> {
        if !poly.is_bounded()? {
            return Err(Error::Config("safety set is unbounded".into()));
        }
        if !poly.has_interior()? {
            return Err(Error::Config("safety set has empty interior".into()));
        }
        Ok(Self::new_unchecked(poly))
    }

    pub(crate) fn new_unchecked(poly: Polytope) -> Self {
        let abs_row_sums = (0..poly.n_rows())
            .map(|j| poly.a().row(j).iter().map(|v| v.abs()).sum())
            .collect();
        Self { poly, abs_row_sums }
    }

    pub fn polytope(&self) -> &Polytope {
        &self.poly
    }

    /// Response dimension `n`.
    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    pub fn n_rows(&self) -> usize {
        self.poly.n_rows()
    }

    pub fn f(&self) -> &DMatrix<f64> {
        self.poly.a()
    }

    pub fn g(&self) -> &DVector<f64> {
        self.poly.b()
    }

    pub fn abs_row_sums(&self) -> &[f64] {
        &self.abs_row_sums
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.poly.contains(y, tol)
    }

    /// Radius of the Euclidean ball around the origin that equals the
    /// response-side constraint of `G_0`: `min_j g_j / (S sum_i |F_ji|)`.
    /// Negative when some `g_j < 0` (then `G_0` is empty).
    pub fn g0_radius(&self, param_bound: f64) -> f64 {
        (0..self.n_rows())
            .map(|j| self.g()[j] / (param_bound * self.abs_row_sums[j]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Axis-aligned action set `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ActionBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Config("action box bounds must have equal positive length".into()));
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::Config("action box must be finite".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::Config("action box lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn symmetric(d: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; d], vec![half_width; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// `L = max over corners of ||x||_2`.
    pub fn norm_bound(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                let m = l.abs().max(u.abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Euclidean distance from an interior point to the box boundary.
    pub fn inner_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (v - l).min(u - v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn as_polytope(&self) -> Result<Polytope> {
        Polytope::from_box(&self.lower, &self.upper)
    }
}

/// Membership in `G_0 = {x : Theta x in E for all Theta with row norms <= S}`.
pub fn in_g0(x: &[f64], safety: &SafetyPolytope, param_bound: f64) -> bool {
    let xn = norm2(x);
    (0..safety.n_rows()).all(|j| param_bound * xn * safety.abs_row_sums[j] <= safety.g()[j])
}

fn gt_lhs(x: &[f64], conf: &ConfidenceState, safety: &SafetyPolytope, j: usize) -> f64 {
    let theta = conf.theta_hat();
    let f = safety.f();
    let mut center = 0.0;
    for i in 0..safety.dim() {
        let tx: f64 = (0..x.len()).map(|k| theta[(i, k)] * x[k]).sum();
        center += f[(j, i)] * tx;
    }
    center + conf.beta_sqrt() * conf.weighted_norm(x) * safety.abs_row_sums[j]
}

/// Membership in `G_t = {x : Theta x in E for all Theta in C_t}`.
pub fn in_gt(x: &[f64], conf: &ConfidenceState, safety: &SafetyPolytope) -> bool {
    (0..safety.n_rows()).all(|j| gt_lhs(x, conf, safety, j) <= safety.g()[j])
}

/// Slack of the tightest row of the `G_t` test; nonnegative iff `in_gt`.
pub fn safety_margin(x: &[f64], conf: &ConfidenceState, safety: &SafetyPolytope) -> f64 {
    (0..safety.n_rows())
        .map(|j| safety.g()[j] - gt_lhs(x, conf, safety, j))
        .fold(f64::INFINITY, f64::min)
}

/// The `G_t` test with everything that depends only on the round precomputed,
/// for evaluating many candidate actions against one confidence state.
#[derive(Debug, Clone)]
pub struct GtEvaluator {
    d: usize,
    /// Row-major `p x d`: row `j` is `(F Theta_hat)_j`.
    centers: Vec<f64>,
    /// `sqrt(beta) sum_i |F_ji|`.
    widths: Vec<f64>,
    g: Vec<f64>,
    /// Row-major `V^{-1}`.
    v_inv: Vec<f64>,
}

impl GtEvaluator {
    pub fn new(conf: &ConfidenceState, safety: &SafetyPolytope) -> Self {
        let d = conf.params().d;
        let ft = safety.f() * conf.theta_hat();
        let p = safety.n_rows();
        let mut centers = Vec::with_capacity(p * d);
        for j in 0..p {
            centers.extend(ft.row(j).iter());
        }
        let widths = safety
            .abs_row_sums()
            .iter()
            .map(|s| s * conf.beta_sqrt())
            .collect();
        let inv = conf.inverse_gram();
        let mut v_inv = Vec::with_capacity(d * d);
        for i in 0..d {
            v_inv.extend(inv.row(i).iter());
        }
        Self {
            d,
            centers,
            widths,
            g: safety.g().iter().copied().collect(),
            v_inv,
        }
    }

    /// `||x||_{V^{-1}}`.
    #[inline]
    pub fn weighted_norm(&self, x: &[f64]) -> f64 {
        quad_form(&self.v_inv, x).max(0.0).sqrt()
    }

    /// Margin given a precomputed `||x||_{V^{-1}}`.
    #[inline]
    pub fn margin_with_norm(&self, x: &[f64], wn: f64) -> f64 {
        let mut worst = f64::INFINITY;
        for (j, (w, g)) in self.widths.iter().zip(&self.g).enumerate() {
            let c = dot(&self.centers[j * self.d..(j + 1) * self.d], x);
            worst = worst.min(g - c - w * wn);
        }
        worst
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.margin_with_norm(x, self.weighted_norm(x))
    }
}

/// Largest Euclidean ball `v + B(r)` inside `G_0`, searched over a grid of
/// candidate centers in the action box (plus the origin when it is inside).
///
/// `G_0` equals `A ∩ B(0, rho)` with `rho = min_j g_j / (S sum_i |F_ji|)`, so
/// the radius at a center `v` is `min(rho - ||v||, distance to the box faces)`.
/// Returns a configuration error when no center has positive radius.
pub fn g0_interior_witness(
    safety: &SafetyPolytope,
    param_bound: f64,
    action_box: &ActionBox,
    grid_points: usize,
) -> Result<(Vec<f64>, f64)> {
    let rho = safety.g0_radius(param_bound);
    let d = action_box.dim();
    let radius_at = |v: &[f64]| (rho - norm2(v)).min(action_box.inner_distance(v));

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut consider = |v: Vec<f64>| {
        let r = radius_at(&v);
        if r > 0.0 && best.as_ref().is_none_or(|(_, br)| r > *br) {
            best = Some((v, r));
        }
    };
    let origin = vec![0.0; d];
    if action_box.contains(&origin) {
        consider(origin);
    }
    let k = grid_points.max(2);
    let total = k.checked_pow(d as u32).unwrap_or(usize::MAX).min(1 << 20);
    for idx in 0..total {
        let mut rem = idx;
        let v: Vec<f64> = (0..d)
            .map(|i| {
                let c = rem % k;
                rem /= k;
                let (l, u) = (action_box.lower()[i], action_box.upper()[i]);
                l + (u - l) * c as f64 / (k - 1) as f64
            })
            .collect();
        consider(v);
    }
    best.ok_or_else(|| {
        Error::Config("initial safe set G_0 has no interior point in the action box".into())
    })
}
