//! Preconditioning operators applied to the momentum matrix.
//!
//! * Row normalization (RN): every row of `V` is scaled to unit ℓ2 norm. This
//!   is the update `diag(VVᵀ)^{-1/2} V`, i.e. the inverse of the diagonal
//!   Kronecker factor `diag(VVᵀ)^{1/2} ⊗ I_n`. Cost is O(mn).
//! * Newton-Schulz (NS₅): a quintic matrix polynomial iterated from
//!   `V / ‖V‖_F`, approximating the polar factor `(VVᵀ)^{-1/2} V`.
//!   Cost is O(mn·min(m, n)).
//!
//! The `_into` forms write into caller-owned buffers and perform no heap
//! allocation once the workspace has seen the shape, which the benchmark
//! relies on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{gemm, l2, svd, Matrix, Trans};

/// Default clamp below which a momentum row is treated as zero.
pub const DEFAULT_RN_EPS: f64 = 1e-8;

/// Added to the Frobenius norm before the Newton-Schulz iteration starts.
pub const NS_NORM_GUARD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    RowNormalize,
    NewtonSchulz5,
    /// Pass-through; turns the matrix optimizers into momentum SGD.
    Identity,
}

impl PreconditionerKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::RowNormalize => "rn",
            Self::NewtonSchulz5 => "ns5",
            Self::Identity => "identity",
        }
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rn" | "row_normalize" | "rmnp" => Ok(Self::RowNormalize),
            "ns5" | "newton_schulz5" | "muon" => Ok(Self::NewtonSchulz5),
            "identity" | "none" => Ok(Self::Identity),
            other => Err(Error::Config(format!("unknown preconditioner '{other}'"))),
        }
    }
}

/// Quintic Newton-Schulz coefficients: `X ← aX + (b·XXᵀ + c·(XXᵀ)²)X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub iterations: usize,
}

impl Default for NsCoefficients {
    /// The widely used Muon coefficients, five iterations.
    fn default() -> Self {
        Self {
            a: 3.4445,
            b: -4.7750,
            c: 2.0315,
            iterations: 5,
        }
    }
}

impl NsCoefficients {
    pub fn new(a: f64, b: f64, c: f64, iterations: usize) -> Result<Self> {
        let coeffs = Self { a, b, c, iterations };
        coeffs.validate()?;
        Ok(coeffs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("Newton-Schulz needs at least one iteration".into()));
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.c.is_finite()) {
            return Err(Error::Config("Newton-Schulz coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Row-wise ℓ2 normalization. Rows with norm ≤ `eps` come out as zero rows.
pub fn row_normalize(v: &Matrix, eps: f64) -> Matrix {
    let mut out = Matrix::zeros(v.rows(), v.cols());
    row_normalize_into(v, eps, &mut out);
    out
}

/// Writes `RN(v)` into `out` and returns how many rows were normalized
/// (the rest were emitted as zeros).
pub fn row_normalize_into(v: &Matrix, eps: f64, out: &mut Matrix) -> usize {
    out.reshape_for(v.rows(), v.cols());
    let n = v.cols();
    let mut active = 0;
    for (src, dst) in v
        .as_slice()
        .chunks_exact(n)
        .zip(out.as_mut_slice().chunks_exact_mut(n))
    {
        let norm = l2(src);
        if norm > eps {
            let inv = 1.0 / norm;
            for (d, s) in dst.iter_mut().zip(src) {
                *d = s * inv;
            }
            active += 1;
        } else {
            dst.fill(0.0);
        }
    }
    active
}

/// The m×m diagonal factor `diag(VVᵀ)^{1/2}`: row norms on the diagonal.
pub fn rmnp_kronecker_preconditioner(v: &Matrix) -> Matrix {
    Matrix::from_diag(&v.row_norms())
}

/// Applies the inverse of a diagonal row factor to `v`, row by row. A zero
/// diagonal entry yields a zero row.
pub fn apply_inverse_row_factor(factor: &Matrix, v: &Matrix) -> Result<Matrix> {
    if factor.rows() != v.rows() || factor.cols() != v.rows() {
        return Err(Error::Dimension {
            op: "apply_inverse_row_factor",
            expected: (v.rows(), v.rows()),
            found: factor.shape(),
        });
    }
    let mut out = v.clone();
    for i in 0..v.rows() {
        let d = factor.get(i, i);
        let row = out.row_mut(i);
        if d > 0.0 {
            row.iter_mut().for_each(|x| *x /= d);
        } else {
            row.fill(0.0);
        }
    }
    Ok(out)
}

/// Reusable buffers for the Newton-Schulz iteration.
#[derive(Debug, Clone)]
pub struct NewtonSchulz {
    coeffs: NsCoefficients,
    x: Matrix,
    next: Matrix,
    gram: Matrix,
    poly: Matrix,
}

impl NewtonSchulz {
    pub fn new(coeffs: NsCoefficients) -> Self {
        Self {
            coeffs,
            x: Matrix::zeros(1, 1),
            next: Matrix::zeros(1, 1),
            gram: Matrix::zeros(1, 1),
            poly: Matrix::zeros(1, 1),
        }
    }

    pub fn coefficients(&self) -> &NsCoefficients {
        &self.coeffs
    }

    /// Runs the iteration on `v` and writes the result (same shape as `v`)
    /// into `out`. Tall inputs are iterated on their transpose.
    pub fn apply_into(&mut self, v: &Matrix, out: &mut Matrix) {
        let (m, n) = v.shape();
        let transposed = m > n;
        if transposed {
            v.transpose_into(&mut self.x);
        } else {
            self.x.reshape_for(m, n);
            self.x.as_mut_slice().copy_from_slice(v.as_slice());
        }
        let (r, k) = self.x.shape();
        self.next.reshape_for(r, k);
        self.gram.reshape_for(r, r);
        self.poly.reshape_for(r, r);

        let scale = 1.0 / (self.x.frobenius_norm() + NS_NORM_GUARD);
        self.x.scale_mut(scale);

        let NsCoefficients { a, b, c, iterations } = self.coeffs;
        for _ in 0..iterations {
            // gram = X Xᵀ
            gemm(1.0, &self.x, Trans::No, &self.x, Trans::Yes, 0.0, &mut self.gram);
            // poly = b·gram + c·gram²
            gemm(c, &self.gram, Trans::No, &self.gram, Trans::No, 0.0, &mut self.poly);
            for (p, g) in self.poly.as_mut_slice().iter_mut().zip(self.gram.as_slice()) {
                *p += b * g;
            }
            // next = a·X + poly·X
            self.next.as_mut_slice().copy_from_slice(self.x.as_slice());
            gemm(1.0, &self.poly, Trans::No, &self.x, Trans::No, a, &mut self.next);
            std::mem::swap(&mut self.x, &mut self.next);
        }

        if transposed {
            self.x.transpose_into(out);
        } else {
            out.reshape_for(m, n);
            out.as_mut_slice().copy_from_slice(self.x.as_slice());
        }
    }

    pub fn apply(&mut self, v: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(v.rows(), v.cols());
        self.apply_into(v, &mut out);
        out
    }
}

/// Newton-Schulz orthogonalization with fresh buffers. A zero input gives a
/// zero output.
pub fn newton_schulz5(v: &Matrix, coeffs: &NsCoefficients) -> Matrix {
    NewtonSchulz::new(*coeffs).apply(v)
}

/// Exact polar factor `(VVᵀ)^{-1/2} V = U Wᵀ` from the SVD `V = U S Wᵀ`.
pub fn exact_orthogonalize(v: &Matrix) -> Result<Matrix> {
    let s = svd(v)?;
    let max = s.singular_values.first().copied().unwrap_or(0.0);
    let threshold = 1e-12 * max;
    if let Some(&bad) = s
        .singular_values
        .iter()
        .find(|&&x| x <= threshold || x == 0.0)
    {
        return Err(Error::RankDeficient {
            value: bad,
            threshold,
        });
    }
    Ok(s.u.matmul_t(&s.v).expect("svd factor shapes agree"))
}

/// A preconditioner kind bundled with whatever workspace it needs.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PreconditionerKind,
    rn_eps: f64,
    ns: NewtonSchulz,
}

impl Preconditioner {
    pub fn new(kind: PreconditionerKind, rn_eps: f64, coeffs: NsCoefficients) -> Self {
        Self {
            kind,
            rn_eps,
            ns: NewtonSchulz::new(coeffs),
        }
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    /// Writes the update direction for momentum `v` into `out`.
    pub fn apply_into(&mut self, v: &Matrix, out: &mut Matrix) {
        match self.kind {
            PreconditionerKind::RowNormalize => {
                row_normalize_into(v, self.rn_eps, out);
            }
            PreconditionerKind::NewtonSchulz5 => self.ns.apply_into(v, out),
            PreconditionerKind::Identity => {
                out.reshape_for(v.rows(), v.cols());
                out.as_mut_slice().copy_from_slice(v.as_slice());
            }
        }
    }

    pub fn flop_estimate(&self, m: usize, n: usize) -> f64 {
        flop_estimate(self.kind, m, n, &self.ns.coeffs)
    }
}

/// Floating-point operation count of one preconditioner call as implemented.
///
/// RN: a multiply-add per entry for the norms, a multiply per entry for the
/// scaling, one square root per row: `3mn + m`. NS₅ with `r = min(m, n)`,
/// `k = max(m, n)`: per iteration two r×k·k×r-shaped products (`2r²k` each) and
/// one r×r square (`2r³`).
pub fn flop_estimate(kind: PreconditionerKind, m: usize, n: usize, coeffs: &NsCoefficients) -> f64 {
    let (m, n) = (m as f64, n as f64);
    match kind {
        PreconditionerKind::RowNormalize => 3.0 * m * n + m,
        PreconditionerKind::NewtonSchulz5 => {
            let r = m.min(n);
            let k = m.max(n);
            coeffs.iterations as f64 * (2.0 * r * r * k * 2.0 + r * r * r * 2.0)
        }
        PreconditionerKind::Identity => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.sub(b).unwrap().frobenius_norm() <= tol
    }

    #[test]
    fn rn_examples() {
        let v = Matrix::from_rows(&[[3.0, 4.0], [0.0, 5.0]]).unwrap();
        let d = row_normalize(&v, DEFAULT_RN_EPS);
        let want = Matrix::from_rows(&[[0.6, 0.8], [0.0, 1.0]]).unwrap();
        assert!(close(&d, &want, 1e-15));
        assert_eq!(row_normalize(&Matrix::identity(4), 0.0), Matrix::identity(4));

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v = Matrix::random_normal(16, 64, &mut rng);
        let d = row_normalize(&v, 0.0);
        assert!((d.frobenius_norm() - 4.0).abs() < 1e-12);
        assert!((v.inner(&d).unwrap() - v.one_two_norm()).abs() < 1e-10);
    }

    #[test]
    fn rn_zero_rows_are_emitted_as_zero() {
        let v = Matrix::from_rows(&[[0.0, 0.0], [1e-9, 0.0], [2.0, 0.0]]).unwrap();
        let mut out = Matrix::zeros(3, 2);
        let active = row_normalize_into(&v, 1e-8, &mut out);
        assert_eq!(active, 1);
        assert_eq!(out.row(0), &[0.0, 0.0]);
        assert_eq!(out.row(1), &[0.0, 0.0]);
        assert_eq!(out.row(2), &[1.0, 0.0]);
        // eps = 0 still guards exact zeros
        assert_eq!(row_normalize(&Matrix::zeros(2, 3), 0.0), Matrix::zeros(2, 3));
    }

    #[test]
    fn kronecker_factor_examples() {
        let v = Matrix::from_rows(&[[3.0, 4.0], [0.0, 5.0]]).unwrap();
        assert_eq!(rmnp_kronecker_preconditioner(&v), Matrix::from_diag(&[5.0, 5.0]));
        assert_eq!(
            rmnp_kronecker_preconditioner(&Matrix::identity(3)),
            Matrix::identity(3)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let v = Matrix::random_normal(7, 11, &mut rng);
        let h = rmnp_kronecker_preconditioner(&v);
        let d = apply_inverse_row_factor(&h, &v).unwrap();
        assert!(close(&d, &row_normalize(&v, 0.0), 1e-12));
        assert!(apply_inverse_row_factor(&Matrix::identity(2), &v).is_err());
    }

    #[test]
    fn ns_rank_one_preserves_direction() {
        let v = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let d = newton_schulz5(&v, &NsCoefficients::default());
        let k = d.get(0, 0) / 0.6;
        assert!(k > 0.0);
        assert!((d.get(0, 1) - 0.8 * k).abs() < 1e-12);
    }

    #[test]
    fn ns_zero_input_gives_zero() {
        let d = newton_schulz5(&Matrix::zeros(3, 5), &NsCoefficients::default());
        assert!(d.is_zero());
    }

    #[test]
    fn ns_equal_singular_values_stay_equal() {
        // orthonormal rows scaled by 2: every singular value is the same
        let v = Matrix::from_rows(&[[2.0, 0.0, 0.0, 0.0], [0.0, 0.0, 2.0, 0.0]]).unwrap();
        let d = newton_schulz5(&v, &NsCoefficients::default());
        let s = svd(&d).unwrap().singular_values;
        assert!((s[0] - s[1]).abs() < 1e-12);
        assert!(s[0] > 0.3 && s[0] < 1.3);
    }

    #[test]
    fn ns_tall_matches_transposed_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let v = Matrix::random_normal(9, 4, &mut rng);
        let coeffs = NsCoefficients::default();
        let tall = newton_schulz5(&v, &coeffs);
        let wide = newton_schulz5(&v.transpose(), &coeffs).transpose();
        assert!(close(&tall, &wide, 1e-10));
    }

    #[test]
    fn ns_close_to_polar_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        // well-conditioned: U diag(s) Wᵀ with s in [1, 10]
        let q1 = exact_orthogonalize(&Matrix::random_normal(8, 8, &mut rng)).unwrap();
        let q2 = exact_orthogonalize(&Matrix::random_normal(8, 8, &mut rng)).unwrap();
        let s: Vec<f64> = (0..8).map(|i| 1.0 + 9.0 * i as f64 / 7.0).collect();
        let v = q1.matmul(&Matrix::from_diag(&s)).unwrap().matmul(&q2).unwrap();
        let polar = exact_orthogonalize(&v).unwrap();
        let ns = newton_schulz5(&v, &NsCoefficients::default());
        assert!(ns.sub(&polar).unwrap().frobenius_norm() <= 0.35 * 8f64.sqrt());
    }

    #[test]
    fn exact_orthogonalize_examples() {
        let d = Matrix::from_rows(&[[3.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(close(&exact_orthogonalize(&d).unwrap(), &Matrix::identity(2), 1e-12));
        let p = Matrix::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap();
        let want = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(close(&exact_orthogonalize(&p).unwrap(), &want, 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let v = Matrix::random_normal(5, 5, &mut rng);
        let q = exact_orthogonalize(&v).unwrap();
        assert!(close(&q.gram(), &Matrix::identity(5), 1e-9));
    }

    #[test]
    fn exact_orthogonalize_rejects_rank_deficiency() {
        let v = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        match exact_orthogonalize(&v) {
            Err(Error::RankDeficient { value, .. }) => assert!(value < 1e-12),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(exact_orthogonalize(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn flop_estimates() {
        let c = NsCoefficients::default();
        assert_eq!(flop_estimate(PreconditionerKind::RowNormalize, 4, 8, &c), 100.0);
        let ns = flop_estimate(PreconditionerKind::NewtonSchulz5, 4, 8, &c);
        assert_eq!(ns, 5.0 * (4.0 * 16.0 * 8.0 + 2.0 * 64.0));
        // symmetric in the orientation
        assert_eq!(ns, flop_estimate(PreconditionerKind::NewtonSchulz5, 8, 4, &c));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("rn".parse::<PreconditionerKind>().unwrap(), PreconditionerKind::RowNormalize);
        assert_eq!("NS5".parse::<PreconditionerKind>().unwrap(), PreconditionerKind::NewtonSchulz5);
        assert!("qr".parse::<PreconditionerKind>().is_err());
        assert!(NsCoefficients::new(1.0, 1.0, 1.0, 0).is_err());
    }
}
