//! Online regularized least squares with row-wise confidence ellipsoids.
//!
//! Each response coordinate `i` has its own estimate `theta_hat^i`, but all
//! rows share one Gram matrix `V_t = nu I + sum_s x_s x_s^T`. The confidence
//! set is `{Theta : ||theta^i - theta_hat^i||_{V_t} <= sqrt(beta_t) for all i}`
//! with
//!
//! ```text
//! sqrt(beta_t) = R sqrt(d log((1 + t L^2 / nu) / (delta / n))) + sqrt(nu) S
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, Cholesky};

/// Constants that enter the confidence radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams {
    /// Subgaussian noise scale `R`.
    pub noise: f64,
    /// Row-norm bound `S` on the true parameter.
    pub param_bound: f64,
    /// Action-norm bound `L`.
    pub action_bound: f64,
    pub delta: f64,
    pub nu: f64,
    /// Response dimension `n`.
    pub n: usize,
    /// Action dimension `d`.
    pub d: usize,
    /// Multiplier on `sqrt(beta_t)`; 1.0 gives the nominal radius.
    pub beta_scale: f64,
    /// Replace the radius by a fixed `sqrt(beta)` (diagnostics only).
    pub beta_override: Option<f64>,
    /// Multiplier on the `sqrt(d beta_t)` radius of the l1 outer approximation.
    pub l1_radius_scale: f64,
}

impl ConfidenceParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.noise, self.param_bound, self.action_bound, self.delta, self.nu]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Input("non-finite confidence parameters".into()));
        }
        if self.nu <= 0.0 {
            return Err(Error::Input("regularizer nu must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Input("delta must lie in (0, 1)".into()));
        }
        if self.noise < 0.0 || self.param_bound < 0.0 || self.action_bound < 0.0 {
            return Err(Error::Input("R, S and L must be nonnegative".into()));
        }
        if self.n == 0 || self.d == 0 {
            return Err(Error::Input("dimensions must be positive".into()));
        }
        Ok(())
    }

    /// The nominal radius `sqrt(beta_t)` at round `t` (before overrides).
    pub fn nominal_beta_sqrt(&self, t: usize) -> f64 {
        let arg = (1.0 + t as f64 * self.action_bound * self.action_bound / self.nu)
            / (self.delta / self.n as f64);
        self.noise * (self.d as f64 * arg.ln()).sqrt() + self.nu.sqrt() * self.param_bound
    }

    /// Radius actually used at round `t`.
    pub fn beta_sqrt(&self, t: usize) -> f64 {
        match self.beta_override {
            Some(b) => b,
            None => self.beta_scale * self.nominal_beta_sqrt(t),
        }
    }
}

/// `V_t`, its Cholesky factor and the cross moments `sum_s x_s y_s^T`.
#[derive(Debug, Clone)]
pub struct GramState {
    v: DMatrix<f64>,
    chol: Cholesky,
    /// `d x n`.
    cross: DMatrix<f64>,
    t: usize,
    nu: f64,
}

impl GramState {
    fn new(d: usize, n: usize, nu: f64) -> Self {
        Self {
            v: DMatrix::identity(d, d) * nu,
            chol: Cholesky::scaled_identity(d, nu),
            cross: DMatrix::zeros(d, n),
            t: 0,
            nu,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

#[derive(Debug, Clone)]
pub struct ConfidenceState {
    params: ConfidenceParams,
    gram: GramState,
    /// `n x d`, row `i` is `theta_hat^i`.
    theta_hat: DMatrix<f64>,
    beta_sqrt: f64,
}

impl ConfidenceState {
    pub fn new(params: ConfidenceParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            gram: GramState::new(params.d, params.n, params.nu),
            theta_hat: DMatrix::zeros(params.n, params.d),
            beta_sqrt: params.beta_sqrt(0),
            params,
        })
    }

    /// Center the regularizer at `prior` instead of zero, i.e. the estimate
    /// becomes `V^{-1} (sum x y + nu prior^T)`. With noiseless data generated
    /// by `prior` the estimate equals `prior` exactly.
    pub fn with_prior(mut self, prior: &DMatrix<f64>) -> Result<Self> {
        if prior.shape() != (self.params.n, self.params.d) {
            return Err(Error::Input("prior has the wrong shape".into()));
        }
        self.gram.cross += prior.transpose() * self.params.nu;
        self.refresh_estimates();
        Ok(self)
    }

    pub fn params(&self) -> &ConfidenceParams {
        &self.params
    }

    pub fn gram(&self) -> &GramState {
        &self.gram
    }

    pub fn theta_hat(&self) -> &DMatrix<f64> {
        &self.theta_hat
    }

    pub fn beta_sqrt(&self) -> f64 {
        self.beta_sqrt
    }

    pub fn rounds(&self) -> usize {
        self.gram.t
    }

    /// Absorb one observation `(x, y)`.
    pub fn update(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        let (d, n) = (self.params.d, self.params.n);
        if x.len() != d || y.len() != n {
            return Err(Error::Input(format!(
                "observation shape ({}, {}) does not match (d, n) = ({d}, {n})",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite observation".into()));
        }
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let l = self.params.action_bound;
        if xn > l * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::Input(format!("action norm {xn} exceeds L = {l}")));
        }
        for i in 0..d {
            for j in 0..d {
                self.gram.v[(i, j)] += x[i] * x[j];
            }
            for k in 0..n {
                self.gram.cross[(i, k)] += x[i] * y[k];
            }
        }
        self.gram.chol.rank_one_update(x);
        self.gram.t += 1;
        self.refresh_estimates();
        Ok(())
    }

    fn refresh_estimates(&mut self) {
        for i in 0..self.params.n {
            let col: Vec<f64> = self.gram.cross.column(i).iter().copied().collect();
            let sol = self.gram.chol.solve(&col);
            for (j, v) in sol.into_iter().enumerate() {
                self.theta_hat[(i, j)] = v;
            }
        }
        self.beta_sqrt = self.params.beta_sqrt(self.gram.t);
    }

    /// `sqrt(x^T V^{-1} x)`.
    pub fn weighted_norm(&self, x: &[f64]) -> f64 {
        let mut z = x.to_vec();
        self.gram.chol.solve_lower_in_place(&mut z);
        z.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||v||_{V}` = `sqrt(v^T V v)`.
    pub fn gram_norm(&self, v: &[f64]) -> f64 {
        let l = self.gram.chol.factor_matrix();
        let d = v.len();
        let mut s = 0.0;
        for j in 0..d {
            let mut w = 0.0;
            for i in j..d {
                w += l[(i, j)] * v[i];
            }
            s += w * w;
        }
        s.sqrt()
    }

    /// Whether `theta` (`n x d`) lies in the confidence set.
    pub fn contains(&self, theta: &DMatrix<f64>) -> bool {
        (0..self.params.n).all(|i| {
            let dev: Vec<f64> = (0..self.params.d)
                .map(|j| theta[(i, j)] - self.theta_hat[(i, j)])
                .collect();
            self.gram_norm(&dev) <= self.beta_sqrt
        })
    }

    /// Radius of the l1 outer approximation, `sqrt(d beta_t)` by default.
    pub fn l1_radius(&self) -> f64 {
        self.params.l1_radius_scale * (self.params.d as f64).sqrt() * self.beta_sqrt
    }

    /// Symmetric `V^{-1/2}` from the eigendecomposition of `V`.
    pub fn inverse_sqrt_gram(&self) -> DMatrix<f64> {
        jacobi_eigen(&self.gram.v).map_values(|l| 1.0 / l.sqrt())
    }

    pub fn inverse_gram(&self) -> DMatrix<f64> {
        self.gram.chol.inverse()
    }

    /// Per row `i`, the `2d` points `theta_hat^i +- r V^{-1/2} e_k`, whose
    /// convex hull contains that row's confidence ellipsoid.
    pub fn l1_vertices(&self) -> Vec<Vec<DVector<f64>>> {
        let w = self.inverse_sqrt_gram();
        let r = self.l1_radius();
        (0..self.params.n)
            .map(|i| {
                let center: DVector<f64> = self.theta_hat.row(i).transpose();
                let mut verts = Vec::with_capacity(2 * self.params.d);
                for k in 0..self.params.d {
                    let dir = w.column(k) * r;
                    verts.push(&center + &dir);
                    verts.push(&center - &dir);
                }
                verts
            })
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        jacobi_eigen(&self.gram.v).min()
    }
}
