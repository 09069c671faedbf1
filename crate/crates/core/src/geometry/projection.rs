//! Dykstra's alternating projections onto an intersection of halfspaces.
//!
//! Dykstra converges linearly and can crawl when the nearest point sits on a
//! thin face or a degenerate vertex. If the sweep budget runs out, the same
//! problem is solved by a dual active-set method, which terminates finitely.

use nalgebra::{DMatrix, DVector};

use super::{GeomConfig, Polytope};
use crate::error::{Error, Result};

pub(super) fn dykstra(poly: &Polytope, point: &[f64], cfg: &GeomConfig) -> Result<Vec<f64>> {
    let m = poly.dim();
    if point.len() != m {
        return Err(Error::Input(format!(
            "point has dimension {}, polytope has {m}",
            point.len()
        )));
    }
    let p = poly.n_rows();
    let rows: Vec<Vec<f64>> = (0..p).map(|j| poly.row(j)).collect();
    let sq: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let b = poly.b();

    let mut x = point.to_vec();
    let mut corr = vec![vec![0.0; m]; p];
    let mut z = vec![0.0; m];
    let mut residual = f64::INFINITY;

    for _ in 0..cfg.projection_sweeps {
        let start = x.clone();
        for j in 0..p {
            for k in 0..m {
                z[k] = x[k] + corr[j][k];
            }
            let excess: f64 = rows[j].iter().zip(&z).map(|(a, v)| a * v).sum::<f64>() - b[j];
            if excess > 0.0 {
                let step = excess / sq[j];
                for k in 0..m {
                    let proj = z[k] - step * rows[j][k];
                    corr[j][k] = z[k] - proj;
                    x[k] = proj;
                }
            } else {
                for k in 0..m {
                    corr[j][k] = 0.0;
                    x[k] = z[k];
                }
            }
        }
        let moved = x
            .iter()
            .zip(&start)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = 1.0 + x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let violation = poly.max_violation(&x);
        residual = moved.max(violation.max(0.0));
        if moved <= cfg.projection_tol * scale && violation <= cfg.feas * scale {
            return Ok(x);
        }
    }
    let stalled = Error::Nonconvergence {
        what: "Dykstra projection",
        iterations: cfg.projection_sweeps,
        residual,
        last: x,
    };
    match active_set(poly, point, cfg) {
        Ok(y) => Ok(y),
        Err(Error::Empty) => Err(Error::Empty),
        Err(_) => Err(stalled),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Goldfarb-Idnani dual active-set method for `min ||x - point||^2` subject
/// to `A x <= b`. Starts from `point` and adds the most violated row until
/// none remain; rows are dropped when their multiplier would turn negative.
fn active_set(poly: &Polytope, point: &[f64], cfg: &GeomConfig) -> Result<Vec<f64>> {
    let m = poly.dim();
    let p = poly.n_rows();
    let rows: Vec<Vec<f64>> = (0..p).map(|j| poly.row(j)).collect();
    let norms: Vec<f64> = rows.iter().map(|r| dot(r, r).sqrt()).collect();
    let b = poly.b();
    let scale = 1.0 + point.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let tol = cfg.feas * scale;

    let mut x = point.to_vec();
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let budget = 50 * (p + m) + 100;

    // Row being added and the multiplier it has accumulated so far.
    let mut entering: Option<(usize, f64)> = None;
    for _ in 0..budget {
        let (j, enter_mult) = match entering {
            Some(e) => e,
            None => {
                let worst = (0..p)
                    .filter(|j| !active.contains(j))
                    .map(|j| (j, (dot(&rows[j], &x) - b[j]) / norms[j]))
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match worst {
                    Some((j, v)) if v > tol => (j, 0.0),
                    _ => return Ok(x),
                }
            }
        };
        let a = &rows[j];

        // Primal direction z: `a` minus its projection on the active normals;
        // dual direction r: coefficients of that projection.
        let (z, r) = if active.is_empty() {
            (a.clone(), Vec::new())
        } else {
            let n = DMatrix::from_fn(m, active.len(), |k, i| rows[active[i]][k]);
            let qr = n.qr();
            let q = qr.q();
            let qa = q.transpose() * DVector::from_column_slice(a);
            let r = qr
                .r()
                .solve_upper_triangular(&qa)
                .ok_or_else(|| Error::DegenerateGeometry("dependent active rows in projection".into()))?;
            let back = &q * &qa;
            ((0..m).map(|k| a[k] - back[k]).collect::<Vec<_>>(), r.iter().copied().collect())
        };

        let mut partial = f64::INFINITY;
        let mut leaving = None;
        for (i, &ri) in r.iter().enumerate() {
            if ri > 0.0 {
                let t = mult[i] / ri;
                if t < partial {
                    partial = t;
                    leaving = Some(i);
                }
            }
        }
        let zz = dot(&z, &z);
        let full = if zz.sqrt() > 1e-12 * norms[j] {
            (dot(a, &x) - b[j]) / dot(&z, a)
        } else {
            f64::INFINITY
        };
        let t = full.min(partial);
        if !t.is_finite() {
            return Err(Error::Empty);
        }
        if full.is_finite() {
            for k in 0..m {
                x[k] -= t * z[k];
            }
        }
        for (u, ri) in mult.iter_mut().zip(&r) {
            *u -= t * ri;
        }
        if t == full {
            active.push(j);
            mult.push(enter_mult + t);
            entering = None;
        } else {
            let i = leaving.expect("partial step has a leaving row");
            active.remove(i);
            mult.remove(i);
            entering = Some((j, enter_mult + t));
        }
    }
    Err(Error::Nonconvergence {
        what: "active-set projection",
        iterations: budget,
        residual: poly.max_violation(&x).max(0.0),
        last: x,
    })
}
