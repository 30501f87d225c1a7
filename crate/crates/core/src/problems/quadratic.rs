use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{random_params, Problem};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::ParamShape;

/// `f(W) = ½ ⟨W, A ∘ W⟩` with entrywise curvature `A` spread linearly over
/// `[1, condition]` in row-major order. `∇f = A ∘ W`, `L_F = condition`, `f* = 0`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    curvature: Matrix,
    condition: f64,
    shapes: [ParamShape; 1],
}

impl Quadratic {
    pub fn new(rows: usize, cols: usize, condition: f64) -> Result<Self> {
        if !(condition >= 1.0 && condition.is_finite()) {
            return Err(Error::Config(format!("condition {condition} must be >= 1")));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::Config("quadratic needs positive dimensions".into()));
        }
        let count = rows * cols;
        let curvature = Matrix::from_fn(rows, cols, |i, j| {
            if count == 1 {
                1.0
            } else {
                1.0 + (condition - 1.0) * (i * cols + j) as f64 / (count - 1) as f64
            }
        });
        Ok(Self {
            curvature,
            condition,
            shapes: [ParamShape::Matrix { rows, cols }],
        })
    }

    pub fn curvature(&self) -> &Matrix {
        &self.curvature
    }
}

impl Problem for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn shapes(&self) -> &[ParamShape] {
        &self.shapes
    }

    fn loss(&self, params: &[Matrix]) -> f64 {
        let w = params[0].as_slice();
        0.5 * w
            .iter()
            .zip(self.curvature.as_slice())
            .map(|(x, a)| a * x * x)
            .sum::<f64>()
    }

    fn gradient(&self, params: &[Matrix]) -> Vec<Matrix> {
        vec![params[0].hadamard(&self.curvature).expect("parameter shape")]
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.condition)
    }

    fn init(&self, seed: u64) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_params(&self.shapes, &mut rng, 1.0)
    }
}
