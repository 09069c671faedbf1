//! Small dense linear-algebra kernels used across the crate.
//!
//! Everything here works on `nalgebra::DMatrix`/`DVector` and is sized for
//! desk-scale problems (dimensions of a handful to a dozen).

use nalgebra::{DMatrix, DVector};

/// Eigendecomposition of a symmetric matrix: `a = vectors * diag(values) * vectors^T`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in ascending order.
    pub values: DVector<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Rebuild `vectors * diag(g(values)) * vectors^T`.
    pub fn map_values(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            let w = g(self.values[k]);
            let v = self.vectors.column(k);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Only the upper triangle is read. Sweeps rotate away every off-diagonal
/// entry in turn until the off-diagonal Frobenius mass is negligible relative
/// to the diagonal.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigen needs a square matrix");
    let mut m = DMatrix::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = DMatrix::<f64>::identity(n, n);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += m[(i, i)] * m[(i, i)];
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    SymEigen { values, vectors }
}

/// Singular values of `a` (ascending) by one-sided Jacobi rotations.
///
/// Columns are orthogonalized in place and the singular values are the final
/// column norms. Working on `a` itself rather than `a^T a` keeps small
/// singular values accurate relative to the largest one, so exactly singular
/// inputs come out at rounding level instead of near `sqrt(eps)`.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    let mut u = if a.nrows() >= a.ncols() {
        a.clone()
    } else {
        a.transpose()
    };
    let (rows, cols) = u.shape();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..rows {
                    alpha += u[(k, i)] * u[(k, i)];
                    beta += u[(k, j)] * u[(k, j)];
                    gamma += u[(k, i)] * u[(k, j)];
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let ui = u[(k, i)];
                    let uj = u[(k, j)];
                    u[(k, i)] = c * ui - s * uj;
                    u[(k, j)] = s * ui + c * uj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols).map(|j| u.column(j).norm()).collect();
    sv.sort_by(f64::total_cmp);
    DVector::from_vec(sv)
}

/// Lower-triangular Cholesky factor that supports rank-1 updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factor of `scale * I`.
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self {
            l: DMatrix::identity(dim, dim) * scale.sqrt(),
        }
    }

    /// Plain Cholesky–Banachiewicz factorization; `None` if not positive definite.
    pub fn factor(a: &DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn factor_matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }

    /// In-place update so that the factor represents `L L^T + x x^T`.
    pub fn rank_one_update(&mut self, x: &[f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut w = x.to_vec();
        for k in 0..n {
            let lkk = self.l[(k, k)];
            let r = lkk.hypot(w[k]);
            let c = r / lkk;
            let s = w[k] / lkk;
            self.l[(k, k)] = r;
            for i in (k + 1)..n {
                let lik = (self.l[(i, k)] + s * w[i]) / c;
                w[i] = c * w[i] - s * lik;
                self.l[(i, k)] = lik;
            }
        }
    }

    /// Solve `L z = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solve `L^T z = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solve `(L L^T) z = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = b.to_vec();
        self.solve_lower_in_place(&mut z);
        self.solve_upper_in_place(&mut z);
        z
    }

    /// `(L L^T)^{-1}` assembled column by column.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `x^T m x` for a dense symmetric `m` stored row-major in a slice.
#[inline]
pub(crate) fn quad_form(m: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        let mut r = 0.0;
        for j in 0..d {
            r += row[j] * x[j];
        }
        s += x[i] * r;
    }
    s
}
