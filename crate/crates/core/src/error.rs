use thiserror::Error;

/// Errors produced by the geometry, estimation, policy and campaign layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("polytope is empty")]
    Empty,

    #[error("polytope is unbounded")]
    Unbounded,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration budget exceeded: {needed} subsets > budget {budget}")]
    Budget { needed: u128, budget: u128 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Nonconvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("infeasible schedule: T' = {t_prime} is not below the horizon T = {horizon}")]
    InfeasibleSchedule { t_prime: usize, horizon: usize },

    #[error("no candidate action is in the safe set")]
    EmptySafeSet,

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("trial with seed {seed} on set '{set}' failed: {source}")]
    Trial {
        set: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
