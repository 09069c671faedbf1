//! Action selection: the pure-exploration sampler, the exploration schedule,
//! and optimistic selection over a candidate grid.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimation::{ConfidenceParams, ConfidenceState};
use crate::linalg::{dot, norm2};
use crate::safe_set::{in_g0, ActionBox, GtEvaluator, SafetyPolytope};

/// Plays `v + (r/2) u` with `u` uniform on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationSampler {
    center: Vec<f64>,
    radius: f64,
}

impl ExplorationSampler {
    /// Checks that the closed ball `v + B(r/2)` lies in `G_0` before accepting it.
    pub fn new(
        center: Vec<f64>,
        radius: f64,
        safety: &SafetyPolytope,
        param_bound: f64,
        action_box: &ActionBox,
    ) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("exploration radius {radius} is invalid")));
        }
        if center.len() != action_box.dim() {
            return Err(Error::Config("exploration center has the wrong dimension".into()));
        }
        let half = radius / 2.0;
        let rho = safety.g0_radius(param_bound);
        let fits = norm2(&center) + half <= rho && action_box.inner_distance(&center) >= half;
        let sampler = Self { center, radius };
        if !fits || !sampler.sphere_probe().all(|x| in_g0(&x, safety, param_bound)) {
            return Err(Error::Config(
                "exploration ball is not contained in the initial safe set".into(),
            ));
        }
        Ok(sampler)
    }

    /// Deterministic probe points on the sampling sphere: `v +- (r/2) e_k`.
    fn sphere_probe(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let d = self.center.len();
        (0..2 * d).map(move |k| {
            let mut x = self.center.clone();
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            x[k / 2] += s * self.radius / 2.0;
            x
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `r^2 / (4d)`, the smallest eigenvalue of the second moment of the draws
    /// beyond `v v^T`.
    pub fn lambda_minus(&self) -> f64 {
        self.radius * self.radius / (4.0 * self.center.len() as f64)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.center.len();
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut norm = norm2(&u);
        while norm == 0.0 {
            u = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            norm = norm2(&u);
        }
        let scale = self.radius / 2.0 / norm;
        self.center
            .iter()
            .zip(&u)
            .map(|(c, v)| c + scale * v)
            .collect()
    }
}

/// How the exploration length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// `T' = ceil(max(T^{2/3}, t_delta, t_h))`.
    Theory,
    /// A fixed exploration length.
    Override(usize),
}

impl std::fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleMode::Theory => write!(f, "theory"),
            ScheduleMode::Override(n) => write!(f, "override:{n}"),
        }
    }
}

impl std::str::FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "theory" {
            return Ok(ScheduleMode::Theory);
        }
        if let Some(n) = s.strip_prefix("override:") {
            return n
                .trim()
                .parse()
                .map(ScheduleMode::Override)
                .map_err(|e| Error::Config(format!("bad override length '{n}': {e}")));
        }
        Err(Error::Config(format!(
            "unknown schedule '{s}' (expected 'theory' or 'override:N')"
        )))
    }
}

/// Exploration length and the constants it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub horizon: usize,
    pub t_prime: usize,
    pub t_delta: f64,
    pub t_h: f64,
    /// Maximum infinity-norm shrinkage of the response set.
    pub h_inf: f64,
    pub lambda_minus: f64,
    /// `beta_T` (squared radius at the horizon).
    pub beta_horizon: f64,
    pub mode: ScheduleMode,
}

/// `ceil(T^{2/3})`, guarding against rounding just above an exact cube.
pub fn two_thirds_power(horizon: usize) -> usize {
    let v = (horizon as f64).cbrt().powi(2);
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        v.ceil() as usize
    }
}

pub fn schedule(
    horizon: usize,
    params: &ConfidenceParams,
    h_inf: f64,
    lambda_minus: f64,
    mode: ScheduleMode,
) -> Result<Schedule> {
    if !(h_inf > 0.0) {
        return Err(Error::Config("maximum shrinkage must be positive".into()));
    }
    if !(lambda_minus > 0.0) {
        return Err(Error::Config("lambda_minus must be positive".into()));
    }
    let l2 = params.action_bound * params.action_bound;
    let beta_horizon = params.beta_sqrt(horizon).powi(2);
    let t_delta = 8.0 * l2 / lambda_minus * (params.d as f64 / params.delta).ln();
    let t_h = 8.0 * beta_horizon * l2 / (lambda_minus * h_inf * h_inf) - 2.0 * params.nu / lambda_minus;
    let t_prime = match mode {
        ScheduleMode::Theory => {
            let need = t_delta.max(t_h);
            if !need.is_finite() || need >= horizon as f64 {
                return Err(Error::InfeasibleSchedule {
                    t_prime: need.ceil().min(usize::MAX as f64) as usize,
                    horizon,
                });
            }
            two_thirds_power(horizon).max(need.ceil() as usize)
        }
        ScheduleMode::Override(n) => n,
    };
    if t_prime >= horizon {
        return Err(Error::InfeasibleSchedule { t_prime, horizon });
    }
    Ok(Schedule {
        horizon,
        t_prime,
        t_delta,
        t_h,
        h_inf,
        lambda_minus,
        beta_horizon,
        mode,
    })
}

/// Uniform grid of `points^d` actions, clipped to the action box.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    origin: Vec<f64>,
    spacing: Vec<f64>,
    points: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl CandidateGrid {
    /// Grid spanning the whole box.
    pub fn over_box(action_box: &ActionBox, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Config("grid needs at least 2 points per axis".into()));
        }
        let d = action_box.dim();
        if (points as f64).powi(d as i32) > 5e7 {
            return Err(Error::Budget {
                needed: (points as u128).pow(d as u32),
                budget: 50_000_000,
            });
        }
        let spacing = (0..d)
            .map(|i| (action_box.upper()[i] - action_box.lower()[i]) / (points - 1) as f64)
            .collect();
        Ok(Self {
            origin: action_box.lower().to_vec(),
            spacing,
            points,
            lower: action_box.lower().to_vec(),
            upper: action_box.upper().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidate `idx` written into `out`; axis 0 varies fastest.
    pub fn point_into(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for i in 0..self.dim() {
            let c = rem % self.points;
            rem /= self.points;
            out[i] = (self.origin[i] + self.spacing[i] * c as f64).clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.point_into(idx, &mut x);
        x
    }
}

/// Same cardinality, spacing multiplied by `shrink_factor`, centered at `around`.
pub fn refine_candidates(grid: &CandidateGrid, around: &[f64], shrink_factor: f64) -> CandidateGrid {
    let half = (grid.points - 1) as f64 / 2.0;
    let spacing: Vec<f64> = grid.spacing.iter().map(|s| s * shrink_factor).collect();
    let origin = around
        .iter()
        .zip(&spacing)
        .map(|(c, s)| c - half * s)
        .collect();
    CandidateGrid {
        origin,
        spacing,
        ..grid.clone()
    }
}

/// Which confidence set the optimism ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    /// The row-wise ellipsoids themselves.
    Exact,
    /// The l1 outer approximation through its `2d` vertices per row.
    L1,
}

impl std::fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolicyMode::Exact => "exact",
            PolicyMode::L1 => "l1",
        })
    }
}

impl std::str::FromStr for PolicyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(PolicyMode::Exact),
            "l1" => Ok(PolicyMode::L1),
            other => Err(Error::Config(format!(
                "unknown policy mode '{other}' (expected 'exact' or 'l1')"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticChoice {
    pub x: Vec<f64>,
    pub theta_tilde: DMatrix<f64>,
    /// `a^T Theta_tilde x`.
    pub value: f64,
    /// `G_t` margin of `x`.
    pub margin: f64,
}

/// Optimistic value of every candidate for one confidence state, with
/// per-round quantities precomputed.
#[derive(Debug, Clone)]
pub struct OptimismEvaluator<'a> {
    conf: &'a ConfidenceState,
    mode: PolicyMode,
    safe: GtEvaluator,
    /// `a^T Theta_hat`.
    center: Vec<f64>,
    /// `sum_i |a_i|`.
    a_abs: f64,
    beta_sqrt: f64,
    l1_radius: f64,
    /// Row-major symmetric `V^{-1/2}`, only for l1 mode.
    inv_sqrt: Vec<f64>,
}

impl<'a> OptimismEvaluator<'a> {
    pub fn new(
        conf: &'a ConfidenceState,
        safety: &SafetyPolytope,
        reward_dir: &DVector<f64>,
        mode: PolicyMode,
    ) -> Self {
        let d = conf.params().d;
        let center: Vec<f64> = (reward_dir.transpose() * conf.theta_hat()).iter().copied().collect();
        let inv_sqrt = match mode {
            PolicyMode::Exact => Vec::new(),
            PolicyMode::L1 => {
                let w = conf.inverse_sqrt_gram();
                (0..d * d).map(|k| w[(k / d, k % d)]).collect()
            }
        };
        Self {
            conf,
            mode,
            safe: GtEvaluator::new(conf, safety),
            center,
            a_abs: reward_dir.iter().map(|v| v.abs()).sum(),
            beta_sqrt: conf.beta_sqrt(),
            l1_radius: conf.l1_radius(),
            inv_sqrt,
        }
    }

    fn linf_whitened(&self, x: &[f64]) -> (f64, usize, f64) {
        let d = x.len();
        let mut best = (0.0, 0, 1.0);
        for k in 0..d {
            let v = dot(&self.inv_sqrt[k * d..(k + 1) * d], x);
            if v.abs() > best.0 {
                best = (v.abs(), k, if v < 0.0 { -1.0 } else { 1.0 });
            }
        }
        best
    }

    /// `(value, margin)` of candidate `x`.
    #[inline]
    pub fn evaluate(&self, x: &[f64]) -> (f64, f64) {
        let wn = self.safe.weighted_norm(x);
        let margin = self.safe.margin_with_norm(x, wn);
        let bonus = match self.mode {
            PolicyMode::Exact => self.beta_sqrt * wn,
            PolicyMode::L1 => self.l1_radius * self.linf_whitened(x).0,
        };
        (dot(&self.center, x) + self.a_abs * bonus, margin)
    }

    /// The maximizing parameter for `x`, reconstructed row by row.
    pub fn theta_tilde(&self, x: &[f64], reward_dir: &DVector<f64>) -> DMatrix<f64> {
        let d = x.len();
        let mut theta = self.conf.theta_hat().clone();
        let dir: Vec<f64> = match self.mode {
            PolicyMode::Exact => {
                let wn = self.safe.weighted_norm(x);
                if wn == 0.0 {
                    return theta;
                }
                let vx = self.conf.gram().cholesky().solve(x);
                vx.iter().map(|v| self.beta_sqrt * v / wn).collect()
            }
            PolicyMode::L1 => {
                let (_, k, s) = self.linf_whitened(x);
                (0..d).map(|j| s * self.l1_radius * self.inv_sqrt[k * d + j]).collect()
            }
        };
        for i in 0..theta.nrows() {
            let sign = if reward_dir[i] > 0.0 {
                1.0
            } else if reward_dir[i] < 0.0 {
                -1.0
            } else {
                0.0
            };
            for j in 0..d {
                theta[(i, j)] += sign * dir[j];
            }
        }
        theta
    }
}

/// Grid search settings for the optimistic step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub mode: PolicyMode,
    pub grid_points: usize,
    pub refine_passes: usize,
    pub refine_shrink: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            mode: PolicyMode::Exact,
            grid_points: 21,
            refine_passes: 2,
            refine_shrink: 0.1,
        }
    }
}

/// Best safe candidate of one grid; ties keep the lowest index.
fn scan(ev: &OptimismEvaluator<'_>, grid: &CandidateGrid, best: &mut Option<(Vec<f64>, f64, f64)>) {
    let mut x = vec![0.0; grid.dim()];
    for idx in 0..grid.len() {
        grid.point_into(idx, &mut x);
        let (value, margin) = ev.evaluate(&x);
        if margin >= 0.0 && best.as_ref().is_none_or(|(_, bv, _)| value > *bv) {
            *best = Some((x.clone(), value, margin));
        }
    }
}

/// Maximize the optimistic value over safe grid candidates, then refine
/// around the incumbent. `warm_start` candidates are considered first.
pub fn select_optimistic(
    conf: &ConfidenceState,
    safety: &SafetyPolytope,
    reward_dir: &DVector<f64>,
    grid: &CandidateGrid,
    search: &SearchConfig,
    warm_start: &[Vec<f64>],
) -> Result<OptimisticChoice> {
    let ev = OptimismEvaluator::new(conf, safety, reward_dir, search.mode);
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for x in warm_start {
        let (value, margin) = ev.evaluate(x);
        if margin >= 0.0 && best.as_ref().is_none_or(|(_, bv, _)| value > *bv) {
            best = Some((x.clone(), value, margin));
        }
    }
    scan(&ev, grid, &mut best);
    let mut current = grid.clone();
    for _ in 0..search.refine_passes {
        let Some((around, _, _)) = &best else { break };
        current = refine_candidates(&current, &around.clone(), search.refine_shrink);
        scan(&ev, &current, &mut best);
    }
    let (x, value, margin) = best.ok_or(Error::EmptySafeSet)?;
    let theta_tilde = ev.theta_tilde(&x, reward_dir);
    Ok(OptimisticChoice {
        x,
        theta_tilde,
        value,
        margin,
    })
}
