//! The environment, the full round loop, regret accounting and the
//! numeric regret bound.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimation::{ConfidenceParams, ConfidenceState};
use crate::geometry::{NormTag, Polytope};
use crate::linalg::singular_values;
use crate::lp::{LinearProgram, LpOutcome};
use crate::policy::{
    refine_candidates, select_optimistic, CandidateGrid, ExplorationSampler, Schedule, SearchConfig,
};
use crate::safe_set::{safety_margin, ActionBox, SafetyPolytope};

/// Smallest singular value below which `Theta*` counts as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Ground truth and the constants the agent is told.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub theta_star: DMatrix<f64>,
    /// Reward `f(y) = a^T y`.
    pub reward_dir: DVector<f64>,
    pub safety: SafetyPolytope,
    pub action_box: ActionBox,
    /// Gaussian noise standard deviation `R`.
    pub noise: f64,
    /// Row-norm bound `S`.
    pub param_bound: f64,
    /// Action-norm bound `L`.
    pub action_bound: f64,
    pub delta: f64,
    pub nu: f64,
    pub horizon: usize,
}

impl ProblemInstance {
    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.theta_star.shape();
        if self.reward_dir.len() != n || self.safety.dim() != n || self.action_box.dim() != d {
            return Err(Error::Config("instance dimensions are inconsistent".into()));
        }
        if self.reward_dir.iter().all(|v| *v == 0.0) {
            return Err(Error::Config("reward direction must be nonzero".into()));
        }
        for i in 0..n {
            let norm = self.theta_star.row(i).norm();
            if norm > self.param_bound {
                return Err(Error::Config(format!(
                    "row {i} of the true parameter has norm {norm} > S = {}",
                    self.param_bound
                )));
            }
        }
        let sv = if n >= d {
            singular_values(&self.theta_star)
        } else {
            singular_values(&self.theta_star.transpose())
        };
        if sv[0] <= RANK_TOL {
            return Err(Error::Config("true parameter is rank deficient".into()));
        }
        let corner = self.action_box.norm_bound();
        if corner > self.action_bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "action box reaches norm {corner} beyond L = {}",
                self.action_bound
            )));
        }
        if !(self.noise >= 0.0) || self.horizon == 0 {
            return Err(Error::Config("noise must be nonnegative and the horizon positive".into()));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.theta_star.ncols()
    }

    pub fn n(&self) -> usize {
        self.theta_star.nrows()
    }

    /// Lipschitz constant `M = ||a||_2` of the reward.
    pub fn lipschitz(&self) -> f64 {
        self.reward_dir.norm()
    }

    pub fn confidence_params(&self, beta_scale: f64, l1_radius_scale: f64) -> ConfidenceParams {
        ConfidenceParams {
            noise: self.noise,
            param_bound: self.param_bound,
            action_bound: self.action_bound,
            delta: self.delta,
            nu: self.nu,
            n: self.n(),
            d: self.d(),
            beta_scale,
            beta_override: None,
            l1_radius_scale,
        }
    }

    pub fn expected_response(&self, x: &[f64]) -> DVector<f64> {
        &self.theta_star * DVector::from_row_slice(x)
    }

    pub fn reward(&self, x: &[f64]) -> f64 {
        self.reward_dir.dot(&self.expected_response(x))
    }

    /// Whether `Theta* x` lies in `E` (to a `1e-9` slack).
    pub fn is_safe(&self, x: &[f64]) -> bool {
        self.safety.contains(self.expected_response(x).as_slice(), 1e-9)
    }

    /// `{x in A : Theta* x in E}` as a polytope in action space.
    pub fn feasible_actions(&self) -> Result<Polytope> {
        let ft = self.safety.f() * &self.theta_star;
        let d = self.d();
        let mut rows: Vec<Vec<f64>> = (0..ft.nrows()).map(|j| ft.row(j).iter().copied().collect()).collect();
        let mut rhs: Vec<f64> = self.safety.g().iter().copied().collect();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            rows.push(e.clone());
            rhs.push(self.action_box.upper()[i]);
            e[i] = -1.0;
            rows.push(e);
            rhs.push(-self.action_box.lower()[i]);
        }
        Polytope::from_rows(&rows, &rhs)
    }
}

/// Exact maximizer of `a^T Theta* x` over the true feasible set (a linear program).
pub fn optimal_action(inst: &ProblemInstance) -> Result<(Vec<f64>, f64)> {
    let x_poly = inst.feasible_actions()?;
    let objective: Vec<f64> = (inst.reward_dir.transpose() * &inst.theta_star).iter().copied().collect();
    let rows = (0..x_poly.n_rows()).map(|j| x_poly.row(j)).collect();
    let rhs = x_poly.b().iter().copied().collect();
    match LinearProgram::new(objective, rows, rhs).solve()? {
        LpOutcome::Optimal { x, value } => Ok((x, value)),
        LpOutcome::Infeasible => Err(Error::Config("the true feasible action set is empty".into())),
        LpOutcome::Unbounded => Err(Error::Unbounded),
    }
}

/// Grid-and-refine maximizer of the same problem, used as a cross-check.
pub fn optimal_action_grid(inst: &ProblemInstance, points: usize, refinements: usize) -> Result<(Vec<f64>, f64)> {
    let mut grid = CandidateGrid::over_box(&inst.action_box, points)?;
    let shrink = 2.0 / (points - 1) as f64;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut x = vec![0.0; inst.d()];
    for pass in 0..=refinements {
        if pass > 0 {
            let Some((around, _)) = &best else { break };
            grid = refine_candidates(&grid, &around.clone(), shrink);
        }
        for idx in 0..grid.len() {
            grid.point_into(idx, &mut x);
            if !inst.safety.contains(inst.expected_response(&x).as_slice(), 0.0) {
                continue;
            }
            let v = inst.reward(&x);
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((x.clone(), v));
            }
        }
    }
    best.ok_or_else(|| Error::Config("no grid point is feasible".into()))
}

/// `y = Theta* x + eps`, `eps ~ N(0, R^2 I)`.
pub fn step_environment<R: Rng + ?Sized>(inst: &ProblemInstance, x: &[f64], rng: &mut R) -> Vec<f64> {
    let mean = inst.expected_response(x);
    mean.iter()
        .map(|m| m + inst.noise * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Explore,
    Exploit,
    /// Exploitation round where no grid candidate was safe; the exploration sampler was used.
    Fallback,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Explore => "explore",
            Phase::Exploit => "exploit",
            Phase::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub phase: Phase,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub reward: f64,
    pub regret: f64,
    pub cum_regret: f64,
    pub safe: bool,
    /// `beta` of the confidence set the decision was made with.
    pub beta: f64,
    /// Smallest eigenvalue of that set's Gram matrix.
    pub lambda_min: f64,
    /// `G_t` margin of the played action under that set.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    pub x_star: Vec<f64>,
    pub opt_value: f64,
    pub schedule: Schedule,
    /// `sum_t min(||x_t||^2_{V_{t-1}^{-1}}, 1)`.
    pub potential_sum: f64,
    /// `2 (d log((d nu + T L^2) / d) - d log nu)`.
    pub potential_bound: f64,
    /// `lambda_min(V_{T'})`, after the exploration rounds.
    pub lambda_min_after_exploration: f64,
    /// `(t, Theta* in C_t)` for each requested round that was reached.
    pub coverage: Vec<(usize, bool)>,
    /// Exploration rounds whose regret exceeded `2 M sqrt(n) L S`.
    pub exploration_bound_breaches: usize,
}

impl TrialLog {
    pub fn violations(&self) -> usize {
        self.rounds.iter().filter(|r| !r.safe).count()
    }

    pub fn fallbacks(&self) -> usize {
        self.rounds.iter().filter(|r| r.phase == Phase::Fallback).count()
    }

    pub fn total_regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Cumulative regret over rounds `T'+1..=t`, one entry per exploitation round.
    pub fn exploitation_cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.rounds[self.schedule.t_prime..]
            .iter()
            .map(|r| {
                acc += r.regret;
                acc
            })
            .collect()
    }

    pub fn exploitation_regret(&self) -> f64 {
        self.exploitation_cumulative().last().copied().unwrap_or(0.0)
    }

    /// Mean instantaneous regret over exploitation rounds `[from, to)` (0-based
    /// within the exploitation phase).
    pub fn mean_exploitation_regret(&self, from: usize, to: usize) -> f64 {
        let e = &self.rounds[self.schedule.t_prime..];
        let slice = &e[from.min(e.len())..to.min(e.len())];
        slice.iter().map(|r| r.regret).sum::<f64>() / slice.len().max(1) as f64
    }

    pub fn potential_holds(&self) -> bool {
        self.potential_sum <= self.potential_bound
    }

    pub fn csv_header(d: usize, n: usize) -> String {
        let mut cols = vec!["t".to_string(), "phase".to_string()];
        cols.extend((1..=d).map(|i| format!("x{i}")));
        cols.extend((1..=n).map(|i| format!("y{i}")));
        cols.extend(
            ["reward", "regret", "cum_regret", "safe", "beta", "lambda_min", "margin"]
                .iter()
                .map(|s| s.to_string()),
        );
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let d = self.x_star.len();
        let n = self.rounds.first().map_or(0, |r| r.y.len());
        let mut s = Self::csv_header(d, n);
        s.push('\n');
        for r in &self.rounds {
            let _ = write!(s, "{},{}", r.t, r.phase.label());
            for v in r.x.iter().chain(&r.y) {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(
                s,
                ",{},{},{},{},{},{},{}",
                r.reward,
                r.regret,
                r.cum_regret,
                u8::from(r.safe),
                r.beta,
                r.lambda_min,
                r.margin
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Per-trial policy settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub search: SearchConfig,
    pub beta_scale: f64,
    pub l1_radius_scale: f64,
    /// Rounds at which `Theta* in C_t` is recorded.
    pub coverage_rounds: Vec<usize>,
    /// Offer the previous exploitation action as an extra candidate.
    pub warm_start: bool,
    /// Fixed `sqrt(beta)` in place of the nominal radius (oracle runs).
    pub beta_override: Option<f64>,
    /// Center the regularizer at this matrix instead of zero (oracle runs).
    pub prior: Option<DMatrix<f64>>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            beta_scale: 1.0,
            l1_radius_scale: 1.0,
            coverage_rounds: Vec::new(),
            warm_start: true,
            beta_override: None,
            prior: None,
        }
    }
}

/// Elliptical-potential right-hand side for `T` rounds.
pub fn potential_bound(d: usize, nu: f64, horizon: usize, action_bound: f64) -> f64 {
    let d = d as f64;
    let t = horizon as f64;
    2.0 * (d * ((d * nu + t * action_bound * action_bound) / d).ln() - d * nu.ln())
}

/// Runs the pure-exploration rounds followed by optimistic rounds.
pub fn run_trial(
    inst: &ProblemInstance,
    schedule: &Schedule,
    sampler: &ExplorationSampler,
    cfg: &TrialConfig,
    seed: u64,
) -> Result<TrialLog> {
    inst.validate()?;
    if schedule.horizon != inst.horizon {
        return Err(Error::Config("schedule horizon differs from the instance horizon".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x_star, opt_value) = optimal_action(inst)?;
    let grid = CandidateGrid::over_box(&inst.action_box, cfg.search.grid_points)?;
    let mut params = inst.confidence_params(cfg.beta_scale, cfg.l1_radius_scale);
    params.beta_override = cfg.beta_override;
    let mut conf = ConfidenceState::new(params)?;
    if let Some(prior) = &cfg.prior {
        conf = conf.with_prior(prior)?;
    }

    let m = inst.lipschitz();
    let n = inst.n();
    let explore_cap = 2.0 * m * (n as f64).sqrt() * inst.action_bound * inst.param_bound;
    let y_star = inst.expected_response(&x_star);

    let mut rounds = Vec::with_capacity(inst.horizon);
    let mut cum = 0.0;
    let mut potential_sum = 0.0;
    let mut lambda_after = conf.min_eigenvalue();
    let mut coverage = Vec::new();
    let mut breaches = 0;
    let mut previous: Option<Vec<f64>> = None;

    for t in 1..=inst.horizon {
        let lambda_min = conf.min_eigenvalue();
        if t == schedule.t_prime + 1 {
            lambda_after = lambda_min;
        }
        let (phase, x) = if t <= schedule.t_prime {
            (Phase::Explore, sampler.sample(&mut rng))
        } else {
            let warm: Vec<Vec<f64>> = if cfg.warm_start {
                previous.iter().cloned().collect()
            } else {
                Vec::new()
            };
            match select_optimistic(&conf, &inst.safety, &inst.reward_dir, &grid, &cfg.search, &warm) {
                Ok(choice) => (Phase::Exploit, choice.x),
                Err(Error::EmptySafeSet) => (Phase::Fallback, sampler.sample(&mut rng)),
                Err(e) => return Err(e),
            }
        };
        let margin = safety_margin(&x, &conf, &inst.safety);
        let wn = conf.weighted_norm(&x);
        potential_sum += (wn * wn).min(1.0);

        let y = step_environment(inst, &x, &mut rng);
        let reward = inst.reward(&x);
        let regret = opt_value - reward;
        let safe = inst.is_safe(&x);

        if phase == Phase::Exploit && margin >= 0.0 && !safe && conf.contains(&inst.theta_star) {
            return Err(Error::Invariant(format!(
                "round {t}: action certified safe under a set containing the truth is unsafe"
            )));
        }
        if safe && regret < -1e-9 * (1.0 + opt_value.abs()) {
            return Err(Error::Invariant(format!(
                "round {t}: safe action beats the optimum by {}",
                -regret
            )));
        }
        if phase == Phase::Explore {
            let gap = m * (&y_star - inst.expected_response(&x)).norm();
            if gap > explore_cap * (1.0 + 1e-12) {
                breaches += 1;
            }
        }
        cum += regret;
        rounds.push(RoundRecord {
            t,
            phase,
            x: x.clone(),
            y: y.clone(),
            reward,
            regret,
            cum_regret: cum,
            safe,
            beta: conf.beta_sqrt() * conf.beta_sqrt(),
            lambda_min,
            margin,
        });
        conf.update(&x, &y)?;
        if cfg.coverage_rounds.contains(&t) {
            coverage.push((t, conf.contains(&inst.theta_star)));
        }
        if phase == Phase::Exploit {
            previous = Some(x);
        }
    }
    if schedule.t_prime >= inst.horizon {
        lambda_after = conf.min_eigenvalue();
    }

    Ok(TrialLog {
        seed,
        rounds,
        x_star,
        opt_value,
        schedule: *schedule,
        potential_sum,
        potential_bound: potential_bound(inst.d(), inst.nu, inst.horizon, inst.action_bound),
        lambda_min_after_exploration: lambda_after,
        coverage,
        exploration_bound_breaches: breaches,
    })
}

/// The three terms of the high-probability regret bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretBound {
    pub exploration: f64,
    /// `None` when the shrinkage argument exceeds the maximum shrinkage.
    pub sharpness: Option<f64>,
    pub bandit: f64,
    /// Argument `2 sqrt(2 beta_T) L / sqrt(2 nu + lambda_- T')` of the sharpness term.
    pub argument: f64,
}

impl RegretBound {
    pub fn total(&self) -> Option<f64> {
        self.sharpness.map(|s| self.exploration + s + self.bandit)
    }
}

/// Evaluates the bound for `inst` under `schedule`, with `y_set` the set of
/// reachable safe responses (equal to `E` when the action box is non-restrictive).
pub fn theoretical_bound(inst: &ProblemInstance, schedule: &Schedule, y_set: &Polytope) -> Result<RegretBound> {
    let m = inst.lipschitz();
    let n = inst.n() as f64;
    let d = inst.d() as f64;
    let l = inst.action_bound;
    let s = inst.param_bound;
    let t = schedule.horizon as f64;
    let tp = schedule.t_prime as f64;
    let beta = schedule.beta_horizon;
    let nu = inst.nu;

    let exploration = 2.0 * m * n.sqrt() * l * s * tp;
    let argument = 2.0 * (2.0 * beta).sqrt() * l / (2.0 * nu + schedule.lambda_minus * tp).sqrt();
    let h = y_set.max_shrinkage(NormTag::Linf)?;
    let sharpness = if argument <= h {
        Some(m * (t - tp) * y_set.sharpness(argument, NormTag::Linf)?)
    } else {
        None
    };
    let log_term = ((1.0 + t * l * l) / (d * nu)).ln().max(0.0);
    let bandit = m * schedule.h_inf.max(1.0) * (n * 8.0 * beta * (t - tp) * d * log_term).sqrt();
    Ok(RegretBound {
        exploration,
        sharpness,
        bandit,
        argument,
    })
}
