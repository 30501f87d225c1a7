//! One-sided Jacobi SVD.
//!
//! Only used as an oracle (exact polar factors, spectra in tests), never on an
//! optimizer hot path, so it favours accuracy over speed.

use super::{dot, l2, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U · diag(S) · Vᵀ` with `k = min(m, n)` components.
#[derive(Debug, Clone)]
pub struct Svd {
    /// m×k, orthonormal columns for every nonzero singular value.
    pub u: Matrix,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// n×k, orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.singular_values.iter().enumerate() {
                let x = us.get(i, j) * s;
                us.set(i, j, x);
            }
        }
        us.matmul_t(&self.v).expect("svd factor shapes agree")
    }
}

pub fn svd(a: &Matrix) -> Result<Svd> {
    if a.rows() < a.cols() {
        let t = svd_tall(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    svd_tall(a)
}

/// Requires m ≥ n. Orthogonalizes the columns of A by plane rotations applied
/// from the right; the rotations accumulate into V.
fn svd_tall(a: &Matrix) -> Result<Svd> {
    let (m, n) = a.shape();
    // columns stored as contiguous rows
    let mut cols = a.transpose();
    let mut v = Matrix::identity(n);
    let tol = f64::EPSILON;
    // columns below this energy are numerically zero and never rotated
    let negligible = (f64::EPSILON * a.frobenius_norm()).powi(2);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let cp = cols.row(p);
                    let cq = cols.row(q);
                    (dot(cp, cp), dot(cq, cq), dot(cp, cq))
                };
                if gamma == 0.0
                    || alpha.min(beta) <= negligible
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut cols, p, q, c, s);
                rotate_rows(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    // v currently holds Vᵀ row-wise (row p is the p-th right singular vector)
    let mut order: Vec<(usize, f64)> = (0..n).map(|j| (j, l2(cols.row(j)))).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));

    let mut u = Matrix::zeros(m, n);
    let mut vout = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (k, &(j, s)) in order.iter().enumerate() {
        singular_values.push(s);
        let col = cols.row(j);
        if s > 0.0 {
            for i in 0..m {
                u.set(i, k, col[i] / s);
            }
        }
        let vj = v.row(j);
        for i in 0..n {
            vout.set(i, k, vj[i]);
        }
    }
    Ok(Svd {
        u,
        singular_values,
        v: vout,
    })
}

fn rotate_rows(mat: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = mat.cols();
    let data = mat.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}
