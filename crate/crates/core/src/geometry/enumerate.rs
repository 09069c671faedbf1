//! Brute-force enumeration over m-subsets of constraint rows.

use nalgebra::{DMatrix, DVector};

use super::{GeomConfig, Polytope};
use crate::error::{Error, Result};
use crate::linalg::singular_values;

/// A vertex together with the `m` linearly independent rows tight at it.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub point: Vec<f64>,
    pub active_rows: Vec<usize>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Lexicographic k-combinations of `0..n`.
struct Combinations {
    idx: Vec<usize>,
    n: usize,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            idx: (0..k).collect(),
            n,
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

fn subsets(poly: &Polytope, cfg: &GeomConfig) -> Result<Combinations> {
    let m = poly.dim();
    if m > cfg.max_dim {
        return Err(Error::Budget {
            needed: binomial(poly.n_rows(), m),
            budget: cfg.subset_budget,
        });
    }
    let needed = binomial(poly.n_rows(), m);
    if needed > cfg.subset_budget {
        return Err(Error::Budget {
            needed,
            budget: cfg.subset_budget,
        });
    }
    Ok(Combinations::new(poly.n_rows(), m))
}

fn submatrix(poly: &Polytope, rows: &[usize]) -> DMatrix<f64> {
    let m = poly.dim();
    DMatrix::from_fn(rows.len(), m, |i, j| poly.a()[(rows[i], j)])
}

/// `(sigma_min, sigma_max)` of a square block.
fn extreme_singular_values(block: &DMatrix<f64>) -> (f64, f64) {
    let s = singular_values(block);
    (s[0], s[s.len() - 1])
}

pub(super) fn vertices(poly: &Polytope, cfg: &GeomConfig) -> Result<Vec<Vertex>> {
    poly.ensure_bounded()?;
    let mut out: Vec<Vertex> = Vec::new();
    for rows in subsets(poly, cfg)? {
        let block = submatrix(poly, &rows);
        let (smin, _) = extreme_singular_values(&block);
        if smin < cfg.rank {
            continue;
        }
        let rhs = DVector::from_fn(rows.len(), |i, _| poly.b()[rows[i]]);
        let Some(sol) = block.lu().solve(&rhs) else {
            continue;
        };
        let point: Vec<f64> = sol.iter().copied().collect();
        let scale = 1.0 + point.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if poly.max_violation(&point) > cfg.feas * scale {
            continue;
        }
        let dup = out.iter().any(|v| {
            v.point
                .iter()
                .zip(&point)
                .all(|(a, b)| (a - b).abs() <= cfg.dup * scale)
        });
        if !dup {
            out.push(Vertex {
                point,
                active_rows: rows,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Empty);
    }
    Ok(out)
}

pub(super) fn condition_constant(poly: &Polytope, cfg: &GeomConfig) -> Result<f64> {
    let mut best: Option<f64> = None;
    for rows in subsets(poly, cfg)? {
        let (smin, smax) = extreme_singular_values(&submatrix(poly, &rows));
        if smin < cfg.rank {
            continue;
        }
        let kappa = smax / smin;
        best = Some(best.map_or(kappa, |b: f64| b.max(kappa)));
    }
    best.ok_or_else(|| {
        Error::DegenerateGeometry("no linearly independent m-subset of constraint rows".into())
    })
}
