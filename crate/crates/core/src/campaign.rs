//! Experiment campaigns: configuration, instance construction, trial loops
//! and the CSV / text reports they leave behind.
//!
//! The configuration is a flat `key = value` file; `#` starts a comment.
//! Safety sets are listed as `set.<name> = eb:<b1>,<b2>,...` (the set
//! `{y : ||diag(b) y||_1 <= 1}`) or `set.<name> = file:<path>` (a polytope in
//! the plain-text matrix format).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{NormTag, Polytope};
use crate::linalg::singular_values;
use crate::policy::{schedule, ExplorationSampler, PolicyMode, Schedule, ScheduleMode, SearchConfig};
use crate::safe_set::{g0_interior_witness, ActionBox, SafetyPolytope};
use crate::simulator::{run_trial, theoretical_bound, ProblemInstance, RegretBound, TrialConfig, TrialLog, RANK_TOL};

/// Padding added to the parameter and action bounds, and to the action box.
const BOUND_PAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    /// `{y : ||diag(b) y||_1 <= 1}`.
    Eb(Vec<f64>),
    File(PathBuf),
}

impl SetSpec {
    fn render(&self) -> String {
        match self {
            SetSpec::Eb(b) => format!("eb:{}", join(b)),
            SetSpec::File(p) => format!("file:{}", p.display()),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("eb:") {
            Ok(SetSpec::Eb(parse_list(rest)?))
        } else if let Some(rest) = s.strip_prefix("file:") {
            Ok(SetSpec::File(PathBuf::from(rest.trim())))
        } else {
            Err(Error::Config(format!("set spec '{s}' must start with 'eb:' or 'file:'")))
        }
    }

    pub fn load(&self) -> Result<SafetyPolytope> {
        match self {
            SetSpec::Eb(b) => build_eb_safety(b),
            SetSpec::File(p) => SafetyPolytope::new(Polytope::read_file(p)?),
        }
    }
}

/// Whether the true parameter is drawn once or once per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMode {
    Shared,
    PerTrial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub d: usize,
    pub n: usize,
    pub horizon: usize,
    pub nu: f64,
    pub delta: f64,
    /// Noise standard deviation.
    pub sigma: f64,
    pub seed: u64,
    pub trials: usize,
    pub reward_dir: Vec<f64>,
    pub sets: Vec<(String, SetSpec)>,
    pub schedule: ScheduleMode,
    pub mode: PolicyMode,
    pub grid_points: usize,
    pub refine_passes: usize,
    pub refine_shrink: f64,
    pub warm_start: bool,
    pub theta: ThetaMode,
    pub beta_scale: f64,
    pub l1_radius_scale: f64,
    pub sharpness_points: usize,
    pub coverage_rounds: Vec<usize>,
    pub out: Option<PathBuf>,
}

impl Default for CampaignConfig {
    /// Three `E_b` sets, `d = n = 3`, `T = 1000`, six trials.
    fn default() -> Self {
        Self {
            d: 3,
            n: 3,
            horizon: 1000,
            nu: 0.1,
            delta: 0.01,
            sigma: 1e-3,
            seed: 1,
            trials: 6,
            reward_dir: vec![1.0, 0.0, 0.0],
            sets: vec![
                ("b1".into(), SetSpec::Eb(vec![0.1, 0.1, 0.1])),
                ("b2".into(), SetSpec::Eb(vec![0.1 / 2.0, 0.1, 0.1])),
                ("b3".into(), SetSpec::Eb(vec![0.1 / 3.0, 0.1, 0.1])),
            ],
            schedule: ScheduleMode::Override(100),
            mode: PolicyMode::Exact,
            grid_points: 21,
            refine_passes: 2,
            refine_shrink: 0.1,
            warm_start: true,
            theta: ThetaMode::Shared,
            beta_scale: 1.0,
            l1_radius_scale: 1.0,
            sharpness_points: 21,
            coverage_rounds: vec![10, 100, 1000],
            out: None,
        }
    }
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| Error::Config(format!("bad list entry '{t}': {e}"))))
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::Config(format!("bad value '{v}' for '{key}': {e}")))
}

impl CampaignConfig {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("d", self.d.to_string());
        kv("n", self.n.to_string());
        kv("horizon", self.horizon.to_string());
        kv("nu", self.nu.to_string());
        kv("delta", self.delta.to_string());
        kv("sigma", self.sigma.to_string());
        kv("seed", self.seed.to_string());
        kv("trials", self.trials.to_string());
        kv("reward", join(&self.reward_dir));
        for (name, spec) in &self.sets {
            kv(&format!("set.{name}"), spec.render());
        }
        kv("schedule", self.schedule.to_string());
        kv("mode", self.mode.to_string());
        kv("grid_points", self.grid_points.to_string());
        kv("refine_passes", self.refine_passes.to_string());
        kv("refine_shrink", self.refine_shrink.to_string());
        kv("warm_start", self.warm_start.to_string());
        kv(
            "theta",
            match self.theta {
                ThetaMode::Shared => "shared".into(),
                ThetaMode::PerTrial => "per-trial".into(),
            },
        );
        kv("beta_scale", self.beta_scale.to_string());
        kv("l1_radius_scale", self.l1_radius_scale.to_string());
        kv("sharpness_points", self.sharpness_points.to_string());
        kv("coverage_rounds", join(&self.coverage_rounds));
        if let Some(out) = &self.out {
            kv("out", out.display().to_string());
        }
        s
    }

    /// Parses a config; unspecified keys keep their defaults, and any
    /// `set.*` key replaces the default set list.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = CampaignConfig::default();
        let mut sets = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected 'key = value', found '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let at_line = |e: Error| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            };
            if let Some(name) = key.strip_prefix("set.") {
                if name.is_empty() || sets.iter().any(|(n, _): &(String, SetSpec)| n == name) {
                    return Err(at_line(Error::Config(format!("bad or duplicate set name '{name}'"))));
                }
                sets.push((name.to_string(), SetSpec::parse(value).map_err(at_line)?));
                continue;
            }
            (|| -> Result<()> {
                match key {
                    "d" => cfg.d = parse_value(key, value)?,
                    "n" => cfg.n = parse_value(key, value)?,
                    "horizon" => cfg.horizon = parse_value(key, value)?,
                    "nu" => cfg.nu = parse_value(key, value)?,
                    "delta" => cfg.delta = parse_value(key, value)?,
                    "sigma" => cfg.sigma = parse_value(key, value)?,
                    "seed" => cfg.seed = parse_value(key, value)?,
                    "trials" => cfg.trials = parse_value(key, value)?,
                    "reward" => cfg.reward_dir = parse_list(value)?,
                    "schedule" => cfg.schedule = value.parse()?,
                    "mode" => cfg.mode = value.parse()?,
                    "grid_points" => cfg.grid_points = parse_value(key, value)?,
                    "refine_passes" => cfg.refine_passes = parse_value(key, value)?,
                    "refine_shrink" => cfg.refine_shrink = parse_value(key, value)?,
                    "warm_start" => cfg.warm_start = parse_value(key, value)?,
                    "theta" => {
                        cfg.theta = match value {
                            "shared" => ThetaMode::Shared,
                            "per-trial" => ThetaMode::PerTrial,
                            _ => return Err(Error::Config(format!("theta must be 'shared' or 'per-trial', not '{value}'"))),
                        }
                    }
                    "beta_scale" => cfg.beta_scale = parse_value(key, value)?,
                    "l1_radius_scale" => cfg.l1_radius_scale = parse_value(key, value)?,
                    "sharpness_points" => cfg.sharpness_points = parse_value(key, value)?,
                    "coverage_rounds" => cfg.coverage_rounds = parse_list(value)?,
                    "out" => cfg.out = Some(PathBuf::from(value)),
                    _ => return Err(Error::Config(format!("unknown key '{key}'"))),
                }
                Ok(())
            })()
            .map_err(at_line)?;
        }
        if !sets.is_empty() {
            cfg.sets = sets;
        }
        Ok(cfg)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.d == 0 || self.n == 0 {
            return bad("dimensions must be positive");
        }
        if self.trials == 0 {
            return bad("trial count must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.nu > 0.0) || !(self.sigma >= 0.0) {
            return bad("nu must be positive and sigma nonnegative");
        }
        if self.reward_dir.len() != self.n {
            return bad("reward direction must have n entries");
        }
        if self.sets.is_empty() {
            return bad("at least one safety set is required");
        }
        for (name, spec) in &self.sets {
            match spec {
                SetSpec::Eb(b) if b.len() != self.n => {
                    return Err(Error::Config(format!("set '{name}' has {} entries, expected n", b.len())))
                }
                SetSpec::File(p) if !p.exists() => {
                    return Err(Error::Config(format!("set file {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        if self.grid_points < 2 || !(self.refine_shrink > 0.0) {
            return bad("grid needs at least 2 points per axis and a positive refine factor");
        }
        if self.sharpness_points < 2 {
            return bad("sharpness curves need at least 2 points");
        }
        Ok(())
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            mode: self.mode,
            grid_points: self.grid_points,
            refine_passes: self.refine_passes,
            refine_shrink: self.refine_shrink,
        }
    }

    pub fn trial_config(&self) -> TrialConfig {
        TrialConfig {
            search: self.search(),
            beta_scale: self.beta_scale,
            l1_radius_scale: self.l1_radius_scale,
            coverage_rounds: self.coverage_rounds.clone(),
            warm_start: self.warm_start,
            beta_override: None,
            prior: None,
        }
    }
}

/// The `2^n` halfspaces `s^T diag(b) y <= 1`, one per sign vector `s`.
pub fn build_eb_safety(b: &[f64]) -> Result<SafetyPolytope> {
    if b.is_empty() || b.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config("E_b needs strictly positive finite b".into()));
    }
    let n = b.len();
    if n > 16 {
        return Err(Error::Config("E_b is limited to n <= 16".into()));
    }
    let rows: Vec<Vec<f64>> = (0..1usize << n)
        .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { -b[i] } else { b[i] }).collect())
        .collect();
    SafetyPolytope::new(Polytope::from_rows(&rows, &vec![1.0; 1 << n])?)
}

/// Draws `Theta*` with i.i.d. `U[-1, 1]` entries, redrawing rank-deficient matrices.
pub fn draw_theta(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    loop {
        let theta = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..=1.0));
        let sv = if n >= d {
            singular_values(&theta)
        } else {
            singular_values(&theta.transpose())
        };
        if sv[0] > RANK_TOL {
            return theta;
        }
    }
}

/// Largest Euclidean norm over the vertices of a polytope.
fn max_vertex_norm(p: &Polytope) -> Result<f64> {
    Ok(p.vertices()?
        .iter()
        .map(|v| crate::linalg::norm2(&v.point))
        .fold(0.0, f64::max))
}

/// `Theta*` together with the bounds derived from it.
#[derive(Debug, Clone)]
pub struct Environment {
    pub theta_star: DMatrix<f64>,
    /// `S = ||Theta*||_2 + 0.1`.
    pub param_bound: f64,
    /// `L`, at least the largest response norm over the safety sets plus 0.1,
    /// and at least the action box's corner norm.
    pub action_bound: f64,
    pub action_box: ActionBox,
}

/// Builds the shared action box and bounds for `theta` across all `sets`.
/// The box is symmetric and contains `{x : Theta x in E}` for every set.
pub fn environment(theta: DMatrix<f64>, sets: &[SafetyPolytope]) -> Result<Environment> {
    let d = theta.ncols();
    let mut half: f64 = 0.0;
    let mut response_norm: f64 = 0.0;
    for e in sets {
        let pre = Polytope::new(e.f() * &theta, e.g().clone())?;
        for v in pre.vertices()? {
            half = half.max(v.point.iter().fold(0.0f64, |m, c| m.max(c.abs())));
        }
        response_norm = response_norm.max(max_vertex_norm(e.polytope())?);
    }
    let action_box = ActionBox::symmetric(d, half + BOUND_PAD)?;
    let spectral = singular_values(&theta).max();
    Ok(Environment {
        param_bound: spectral + BOUND_PAD,
        action_bound: (response_norm + BOUND_PAD).max(action_box.norm_bound()),
        action_box,
        theta_star: theta,
    })
}

/// Geometric statistics of one polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub condition_constant: f64,
    pub diameter: f64,
    pub vertices: usize,
    /// Maximum shrinkage for the 1-, 2- and infinity-norm.
    pub max_shrinkage: [f64; 3],
}

impl GeometryReport {
    pub fn of(poly: &Polytope) -> Result<Self> {
        let mut h = [0.0; 3];
        for (slot, norm) in h.iter_mut().zip(NormTag::ALL) {
            *slot = poly.max_shrinkage(norm)?;
        }
        Ok(Self {
            condition_constant: poly.condition_constant()?,
            diameter: poly.diameter()?,
            vertices: poly.vertices()?.len(),
            max_shrinkage: h,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "K = {}", self.condition_constant);
        let _ = writeln!(s, "diameter = {}", self.diameter);
        let _ = writeln!(s, "vertices = {}", self.vertices);
        for (v, norm) in self.max_shrinkage.iter().zip(NormTag::ALL) {
            let _ = writeln!(s, "H_{} = {}", norm.label(), v);
        }
        s
    }
}

pub fn sharpness_csv(curve: &[(f64, f64)]) -> String {
    let mut s = String::from("delta,sharpness\n");
    for (d, v) in curve {
        let _ = writeln!(s, "{d},{v}");
    }
    s
}

/// Writes `geometry_<name>.txt`-style report text and `sharpness_<name>_<norm>.csv`
/// for every norm into `dir`.
pub fn geometry_report(poly: &Polytope, name: &str, points: usize, dir: &Path) -> Result<GeometryReport> {
    let report = GeometryReport::of(poly)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("geometry_{name}.txt")), report.to_text())?;
    for norm in NormTag::ALL {
        let curve = poly.sharpness_curve(norm, points)?;
        std::fs::write(
            dir.join(format!("sharpness_{name}_{}.csv", norm.label())),
            sharpness_csv(&curve),
        )?;
    }
    Ok(report)
}

/// Mean and normal-approximation 95% interval per index; `None` bounds with
/// fewer than two samples.
pub fn mean_ci(samples: &[f64]) -> (f64, Option<(f64, f64)>) {
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    if samples.len() < 2 {
        return (mean, None);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let half = 1.96 * var.sqrt() / k.sqrt();
    (mean, Some((mean - half, mean + half)))
}

#[derive(Debug, Clone)]
pub struct SetSummary {
    pub name: String,
    pub geometry: GeometryReport,
    pub trials: Vec<TrialLog>,
    /// Per exploitation round index: (mean cumulative regret, CI).
    pub curve: Vec<(f64, Option<(f64, f64)>)>,
    /// Bound for the first trial's environment and schedule.
    pub bound: RegretBound,
    pub param_bound: f64,
    pub action_bound: f64,
}

impl SetSummary {
    pub fn violations(&self) -> usize {
        self.trials.iter().map(|t| t.violations()).sum()
    }

    pub fn mean_final_exploitation_regret(&self) -> f64 {
        let v: Vec<f64> = self.trials.iter().map(|t| t.exploitation_regret()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn mean_total_regret(&self) -> f64 {
        self.trials.iter().map(|t| t.total_regret()).sum::<f64>() / self.trials.len() as f64
    }

    pub fn report_text(&self) -> String {
        let mut s = self.geometry.to_text();
        let sch = &self.trials[0].schedule;
        let _ = writeln!(s, "S = {}", self.param_bound);
        let _ = writeln!(s, "L = {}", self.action_bound);
        let _ = writeln!(s, "t_prime = {}", sch.t_prime);
        let _ = writeln!(s, "t_delta = {}", sch.t_delta);
        let _ = writeln!(s, "t_h = {}", sch.t_h);
        let _ = writeln!(s, "lambda_minus = {}", sch.lambda_minus);
        let _ = writeln!(s, "beta_T = {}", sch.beta_horizon);
        let _ = writeln!(s, "trials = {}", self.trials.len());
        let _ = writeln!(s, "violations = {}", self.violations());
        let _ = writeln!(s, "fallbacks = {}", self.trials.iter().map(|t| t.fallbacks()).sum::<usize>());
        let _ = writeln!(s, "mean_exploitation_regret = {}", self.mean_final_exploitation_regret());
        let _ = writeln!(s, "mean_total_regret = {}", self.mean_total_regret());
        let _ = writeln!(s, "bound_exploration = {}", self.bound.exploration);
        match self.bound.sharpness {
            Some(v) => {
                let _ = writeln!(s, "bound_sharpness = {v}");
            }
            None => {
                let _ = writeln!(s, "bound_sharpness = n/a");
            }
        }
        let _ = writeln!(s, "bound_bandit = {}", self.bound.bandit);
        let _ = writeln!(s, "bound_argument = {}", self.bound.argument);
        s
    }
}

#[derive(Debug, Clone)]
pub struct CampaignSummary {
    pub sets: Vec<SetSummary>,
}

impl CampaignSummary {
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("set,round,mean_cum_regret,ci_low,ci_high,trials\n");
        for set in &self.sets {
            for (k, (mean, ci)) in set.curve.iter().enumerate() {
                let (lo, hi) = ci.map_or((String::new(), String::new()), |(l, h)| (l.to_string(), h.to_string()));
                let _ = writeln!(s, "{},{},{},{},{},{}", set.name, k + 1, mean, lo, hi, set.trials.len());
            }
        }
        s
    }
}

/// One safety set ready to run: the set and its geometry.
struct PreparedSet {
    name: String,
    safety: SafetyPolytope,
    geometry: GeometryReport,
    h_inf: f64,
}

/// Everything needed to run one trial on one set.
pub struct TrialSetup {
    pub instance: ProblemInstance,
    pub sampler: ExplorationSampler,
    pub schedule: Schedule,
}

fn prepare_sets(cfg: &CampaignConfig) -> Result<Vec<PreparedSet>> {
    cfg.sets
        .iter()
        .map(|(name, spec)| {
            let safety = spec.load()?;
            if safety.dim() != cfg.n {
                return Err(Error::Config(format!("set '{name}' lives in dimension {}, expected n", safety.dim())));
            }
            let geometry = GeometryReport::of(safety.polytope())?;
            let h_inf = geometry.max_shrinkage[2];
            Ok(PreparedSet {
                name: name.clone(),
                safety,
                geometry,
                h_inf,
            })
        })
        .collect()
}

fn setup_for(cfg: &CampaignConfig, env: &Environment, set: &PreparedSet) -> Result<TrialSetup> {
    let instance = ProblemInstance {
        theta_star: env.theta_star.clone(),
        reward_dir: DVector::from_vec(cfg.reward_dir.clone()),
        safety: set.safety.clone(),
        action_box: env.action_box.clone(),
        noise: cfg.sigma,
        param_bound: env.param_bound,
        action_bound: env.action_bound,
        delta: cfg.delta,
        nu: cfg.nu,
        horizon: cfg.horizon,
    };
    let (v, r) = g0_interior_witness(&set.safety, env.param_bound, &env.action_box, 11)?;
    let sampler = ExplorationSampler::new(v, r, &set.safety, env.param_bound, &env.action_box)?;
    let params = instance.confidence_params(cfg.beta_scale, cfg.l1_radius_scale);
    let schedule = schedule(cfg.horizon, &params, set.h_inf, sampler.lambda_minus(), cfg.schedule)?;
    Ok(TrialSetup {
        instance,
        sampler,
        schedule,
    })
}

/// Trial setups for every set (outer) and trial (inner), without running them.
pub fn trial_setups(cfg: &CampaignConfig) -> Result<Vec<Vec<TrialSetup>>> {
    cfg.validate()?;
    let sets = prepare_sets(cfg)?;
    let safeties: Vec<SafetyPolytope> = sets.iter().map(|s| s.safety.clone()).collect();
    let envs: Vec<Environment> = match cfg.theta {
        ThetaMode::Shared => vec![environment(draw_theta(cfg.n, cfg.d, cfg.seed), &safeties)?],
        ThetaMode::PerTrial => (0..cfg.trials)
            .map(|k| environment(draw_theta(cfg.n, cfg.d, cfg.seed + k as u64), &safeties))
            .collect::<Result<_>>()?,
    };
    sets.iter()
        .map(|set| {
            (0..cfg.trials)
                .map(|k| setup_for(cfg, &envs[k.min(envs.len() - 1)], set))
                .collect()
        })
        .collect()
}

/// Runs every trial of every set; writes CSVs and reports when `cfg.out` is set.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignSummary> {
    cfg.validate()?;
    let sets = prepare_sets(cfg)?;
    let safeties: Vec<SafetyPolytope> = sets.iter().map(|s| s.safety.clone()).collect();
    let shared = match cfg.theta {
        ThetaMode::Shared => Some(environment(draw_theta(cfg.n, cfg.d, cfg.seed), &safeties)?),
        ThetaMode::PerTrial => None,
    };
    if let Some(out) = &cfg.out {
        std::fs::create_dir_all(out)?;
    }
    let tcfg = cfg.trial_config();

    let mut summaries = Vec::with_capacity(sets.len());
    for set in &sets {
        let mut logs = Vec::with_capacity(cfg.trials);
        let mut first: Option<(Environment, TrialSetup)> = None;
        for k in 0..cfg.trials {
            let seed = cfg.seed + k as u64;
            let wrap = |e: Error| Error::Trial {
                set: set.name.clone(),
                seed,
                source: Box::new(e),
            };
            let env = match &shared {
                Some(env) => env.clone(),
                None => environment(draw_theta(cfg.n, cfg.d, seed), &safeties).map_err(wrap)?,
            };
            let setup = setup_for(cfg, &env, set).map_err(wrap)?;
            let log = run_trial(&setup.instance, &setup.schedule, &setup.sampler, &tcfg, seed).map_err(wrap)?;
            if let Some(out) = &cfg.out {
                log.write_csv(out.join(format!("trial_{}_{k}.csv", set.name)))?;
            }
            logs.push(log);
            if first.is_none() {
                first = Some((env, setup));
            }
        }
        let (env, setup) = first.expect("at least one trial");
        let bound = theoretical_bound(&setup.instance, &setup.schedule, set.safety.polytope())?;

        let series: Vec<Vec<f64>> = logs.iter().map(|l| l.exploitation_cumulative()).collect();
        let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
        let curve = (0..len)
            .map(|i| mean_ci(&series.iter().map(|s| s[i]).collect::<Vec<_>>()))
            .collect();

        let summary = SetSummary {
            name: set.name.clone(),
            geometry: set.geometry.clone(),
            trials: logs,
            curve,
            bound,
            param_bound: env.param_bound,
            action_bound: env.action_bound,
        };
        if let Some(out) = &cfg.out {
            std::fs::write(out.join(format!("geometry_{}.txt", set.name)), summary.report_text())?;
            for norm in NormTag::ALL {
                let curve = set.safety.polytope().sharpness_curve(norm, cfg.sharpness_points)?;
                std::fs::write(
                    out.join(format!("sharpness_{}_{}.csv", set.name, norm.label())),
                    sharpness_csv(&curve),
                )?;
            }
        }
        summaries.push(summary);
    }
    let summary = CampaignSummary { sets: summaries };
    if let Some(out) = &cfg.out {
        std::fs::write(out.join("summary.csv"), summary.summary_csv())?;
    }
    Ok(summary)
}

/// A tiny configuration that finishes in well under a second.
pub fn smoke_config() -> CampaignConfig {
    CampaignConfig {
        horizon: 10,
        sigma: 0.0,
        trials: 1,
        schedule: ScheduleMode::Override(3),
        grid_points: 7,
        refine_passes: 1,
        refine_shrink: 0.34,
        sharpness_points: 5,
        coverage_rounds: vec![10],
        ..CampaignConfig::default()
    }
}
