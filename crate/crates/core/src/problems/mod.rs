//! Small differentiable objectives with analytic gradients, and the additive
//! gradient-noise model used to make them stochastic.

mod logreg;
mod mlp;
mod quadratic;

pub use logreg::LogReg;
pub use mlp::Mlp;
pub use quadratic::Quadratic;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::ParamShape;

/// A differentiable objective over a list of parameter matrices.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn shapes(&self) -> &[ParamShape];

    fn loss(&self, params: &[Matrix]) -> f64;

    fn gradient(&self, params: &[Matrix]) -> Vec<Matrix>;

    /// Known lower bound `f*`, when one exists.
    fn lower_bound(&self) -> Option<f64> {
        None
    }

    /// Frobenius-norm Lipschitz constant of the gradient, when known.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// Deterministic initial parameters.
    fn init(&self, seed: u64) -> Vec<Matrix>;
}

/// Declarative problem choice, as read from run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic { m: usize, n: usize, condition: f64 },
    Logreg { samples: usize, features: usize, reg: f64 },
    Mlp { widths: Vec<usize>, samples: usize },
}

impl ProblemSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn Problem>> {
        Ok(match self {
            Self::Quadratic { m, n, condition } => Box::new(Quadratic::new(*m, *n, *condition)?),
            Self::Logreg {
                samples,
                features,
                reg,
            } => Box::new(LogReg::new(*samples, *features, *reg, seed)?),
            Self::Mlp { widths, samples } => Box::new(Mlp::new(widths, *samples, seed)?),
        })
    }
}

/// Additive Gaussian gradient noise with `E‖ξ‖_F² = σ²/B` summed over all
/// parameters. Draws are keyed by `(seed, step, parameter)`, so they do not
/// depend on evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub batch: usize,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            sigma: 0.0,
            batch: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma {} must be >= 0", self.sigma)));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be positive".into()));
        }
        Ok(())
    }

    /// Adds the step-`t` noise draw to `grads` in place.
    pub fn perturb(&self, grads: &mut [Matrix], t: u64) {
        if self.sigma == 0.0 {
            return;
        }
        let total: usize = grads.iter().map(Matrix::len).sum();
        let std = self.sigma / ((self.batch * total) as f64).sqrt();
        for (pid, g) in grads.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_key(self.seed, t, pid as u64));
            for x in g.as_mut_slice() {
                let z: f64 = rng.sample(StandardNormal);
                *x += std * z;
            }
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_key(seed: u64, t: u64, pid: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ t) ^ pid.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Derives an independent seed for a named purpose from a run seed.
pub fn derive_seed(seed: u64, purpose: u64) -> u64 {
    splitmix64(seed ^ splitmix64(purpose))
}

/// `∇f(params) + ξ_t`.
pub fn stochastic_gradient(p: &dyn Problem, params: &[Matrix], noise: &NoiseModel, t: u64) -> Vec<Matrix> {
    let mut g = p.gradient(params);
    noise.perturb(&mut g, t);
    g
}

/// Central finite-difference gradient with step `h`.
pub fn numerical_gradient(p: &dyn Problem, params: &[Matrix], h: f64) -> Vec<Matrix> {
    let mut work: Vec<Matrix> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let (rows, cols) = params[k].shape();
        let mut g = Matrix::zeros(rows, cols);
        for idx in 0..rows * cols {
            let orig = work[k].as_slice()[idx];
            work[k].as_mut_slice()[idx] = orig + h;
            let fp = p.loss(&work);
            work[k].as_mut_slice()[idx] = orig - h;
            let fm = p.loss(&work);
            work[k].as_mut_slice()[idx] = orig;
            g.as_mut_slice()[idx] = (fp - fm) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

/// Frobenius norm of a list of matrices taken as one vector.
pub fn total_frobenius(ms: &[Matrix]) -> f64 {
    ms.iter()
        .map(|m| {
            let f = m.frobenius_norm();
            f * f
        })
        .sum::<f64>()
        .sqrt()
}

/// Sum of per-parameter (1,2)-norms.
pub fn total_one_two(ms: &[Matrix]) -> f64 {
    ms.iter().map(Matrix::one_two_norm).sum()
}

/// Largest relative discrepancy `‖a - b‖_F / max(‖a‖_F, ‖b‖_F, floor)` over
/// the parameter list.
pub fn relative_error(a: &[Matrix], b: &[Matrix], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x.sub(y).expect("matching shapes").frobenius_norm();
            d / x.frobenius_norm().max(y.frobenius_norm()).max(floor)
        })
        .fold(0.0, f64::max)
}

pub(crate) fn random_params(shapes: &[ParamShape], rng: &mut impl Rng, scale: f64) -> Vec<Matrix> {
    shapes
        .iter()
        .map(|s| {
            let (m, n) = s.dims();
            Matrix::random_normal(m, n, rng).scale(scale)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_exact() {
        let q = Quadratic::new(3, 4, 5.0).unwrap();
        let w = q.init(1);
        let noise = NoiseModel {
            sigma: 0.0,
            batch: 1,
            seed: 9,
        };
        assert_eq!(stochastic_gradient(&q, &w, &noise, 3), q.gradient(&w));
    }

    #[test]
    fn noise_is_reproducible_and_step_keyed() {
        let q = Quadratic::new(3, 4, 5.0).unwrap();
        let w = q.init(1);
        let noise = NoiseModel {
            sigma: 1.0,
            batch: 2,
            seed: 9,
        };
        let a = stochastic_gradient(&q, &w, &noise, 3);
        assert_eq!(a, stochastic_gradient(&q, &w, &noise, 3));
        assert_ne!(a, stochastic_gradient(&q, &w, &noise, 4));
    }

    #[test]
    fn noise_moments() {
        let q = Quadratic::new(4, 6, 3.0).unwrap();
        let w = q.init(2);
        let exact = q.gradient(&w);
        let noise = NoiseModel {
            sigma: 2.0,
            batch: 4,
            seed: 77,
        };
        let draws = 10_000;
        let mut mean = Matrix::zeros(4, 6);
        let mut sq = 0.0;
        for t in 0..draws {
            let g = stochastic_gradient(&q, &w, &noise, t);
            let xi = g[0].sub(&exact[0]).unwrap();
            mean.axpy(1.0 / draws as f64, &xi).unwrap();
            let f = xi.frobenius_norm();
            sq += f * f;
        }
        let var = sq / draws as f64;
        let target = 4.0 / 4.0;
        assert!((var - target).abs() / target < 0.05, "variance {var}");
        let bound = 3.0 * (2.0 / (4.0 * draws as f64).sqrt()) * (24f64).sqrt();
        assert!(mean.frobenius_norm() < bound);
    }

    #[test]
    fn aggregate_norms() {
        let a = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[0.0], [12.0]]).unwrap();
        assert_eq!(total_frobenius(&[a.clone(), b.clone()]), 13.0);
        assert_eq!(total_one_two(&[a, b]), 17.0);
    }

    #[test]
    fn spec_builds() {
        let spec = ProblemSpec::Mlp {
            widths: vec![3, 4, 2],
            samples: 8,
        };
        let p = spec.build(1).unwrap();
        assert_eq!(p.shapes().len(), 4);
        assert!(ProblemSpec::Quadratic { m: 2, n: 2, condition: 0.5 }.build(0).is_err());
    }
}
