use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{derive_seed, random_params, Problem};
use crate::error::{Error, Result};
use crate::matrix::{dot, l2, svd, Matrix};
use crate::optim::ParamShape;

const MARGIN: f64 = 0.1;

/// ℓ2-regularized binary logistic regression on a synthetic dataset that is
/// linearly separable with margin [`MARGIN`] along a hidden unit direction.
#[derive(Debug, Clone)]
pub struct LogReg {
    x: Matrix,
    y: Vec<f64>,
    reg: f64,
    smoothness: f64,
    shapes: [ParamShape; 1],
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogReg {
    pub fn new(samples: usize, features: usize, reg: f64, seed: u64) -> Result<Self> {
        if samples == 0 || features == 0 {
            return Err(Error::Config("logreg sizes must be positive".into()));
        }
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::Config(format!("reg {reg} must be >= 0")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x106_5E6));
        let dir = Matrix::random_normal(1, features, &mut rng);
        let dir = dir.scale(1.0 / dir.frobenius_norm());
        let mut x = Matrix::random_normal(samples, features, &mut rng);
        let mut y = Vec::with_capacity(samples);
        for i in 0..samples {
            let s = dot(x.row(i), dir.row(0));
            let sign = if s >= 0.0 { 1.0 } else { -1.0 };
            // push the point away from the separating hyperplane
            for (xi, d) in x.row_mut(i).iter_mut().zip(dir.row(0)) {
                *xi += sign * MARGIN * d;
            }
            y.push(sign);
        }
        let s_max = svd(&x)?.singular_values[0];
        let smoothness = 0.25 * s_max * s_max / samples as f64 + reg;
        Ok(Self {
            x,
            y,
            reg,
            smoothness,
            shapes: [ParamShape::Vector { len: features }],
        })
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn features(&self) -> &Matrix {
        &self.x
    }
}

impl Problem for LogReg {
    fn name(&self) -> &str {
        "logreg"
    }

    fn shapes(&self) -> &[ParamShape] {
        &self.shapes
    }

    fn loss(&self, params: &[Matrix]) -> f64 {
        let w = params[0].row(0);
        let n = self.y.len() as f64;
        let data: f64 = self
            .x
            .row_iter()
            .zip(&self.y)
            .map(|(xi, yi)| softplus(-yi * dot(xi, w)))
            .sum();
        let wn = l2(w);
        data / n + 0.5 * self.reg * wn * wn
    }

    fn gradient(&self, params: &[Matrix]) -> Vec<Matrix> {
        let w = params[0].row(0);
        let n = self.y.len() as f64;
        let mut g = params[0].scale(self.reg);
        let gs = g.row_mut(0);
        for (xi, yi) in self.x.row_iter().zip(&self.y) {
            let coef = -yi * sigmoid(-yi * dot(xi, w)) / n;
            for (gj, xj) in gs.iter_mut().zip(xi) {
                *gj += coef * xj;
            }
        }
        vec![g]
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.smoothness)
    }

    fn init(&self, seed: u64) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_params(&self.shapes, &mut rng, 0.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{numerical_gradient, relative_error};

    #[test]
    fn zero_weights_give_ln2() {
        let p = LogReg::new(40, 5, 0.0, 1).unwrap();
        assert!((p.loss(&[Matrix::zeros(1, 5)]) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn data_is_separable_with_margin() {
        let p = LogReg::new(200, 6, 0.0, 2).unwrap();
        assert!(p.labels().iter().any(|&y| y > 0.0));
        assert!(p.labels().iter().any(|&y| y < 0.0));
    }

    #[test]
    fn finite_differences() {
        let p = LogReg::new(30, 7, 0.01, 3).unwrap();
        for seed in 0..3 {
            let w = random_params(p.shapes(), &mut ChaCha8Rng::seed_from_u64(seed), 1.0);
            let fd = numerical_gradient(&p, &w, 1e-5);
            assert!(relative_error(&p.gradient(&w), &fd, 1e-8) < 1e-6);
        }
    }

    #[test]
    fn huge_regularizer_pins_optimum_to_zero() {
        let p = LogReg::new(50, 4, 1e6, 4).unwrap();
        let mut w = vec![Matrix::from_rows(&[[1.0, -2.0, 0.5, 3.0]]).unwrap()];
        let step = 1.0 / p.smoothness().unwrap();
        for _ in 0..50 {
            let g = p.gradient(&w);
            w[0].axpy(-step, &g[0]).unwrap();
        }
        assert!(w[0].frobenius_norm() < 1e-3);
    }

    #[test]
    fn stable_tails() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
