use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{derive_seed, Problem};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::ParamShape;

const LABEL_NOISE: f64 = 0.1;

/// Tanh MLP regression with hand-written reverse mode.
///
/// Parameters are ordered `[W_1, b_1, W_2, b_2, …]` with `W_l` of shape
/// `widths[l] × widths[l-1]` and `b_l` a vector. Hidden layers use tanh, the
/// output layer is linear, and the loss is `(1/N) Σ_s ‖ŷ_s − y_s‖²`.
/// Targets come from a random teacher network of the same architecture plus
/// Gaussian label noise.
#[derive(Debug, Clone)]
pub struct Mlp {
    widths: Vec<usize>,
    inputs: Matrix,
    targets: Matrix,
    shapes: Vec<ParamShape>,
}

struct Forward {
    /// Layer inputs `H_0 = X, H_1, …, H_{L-1}` followed by the output.
    activations: Vec<Matrix>,
}

fn layer_shapes(widths: &[usize]) -> Vec<ParamShape> {
    widths
        .windows(2)
        .flat_map(|w| {
            [
                ParamShape::Matrix {
                    rows: w[1],
                    cols: w[0],
                },
                ParamShape::Vector { len: w[1] },
            ]
        })
        .collect()
}

fn forward(params: &[Matrix], x: &Matrix) -> Forward {
    let layers = params.len() / 2;
    let mut activations = Vec::with_capacity(layers + 1);
    activations.push(x.clone());
    for l in 0..layers {
        let w = &params[2 * l];
        let b = params[2 * l + 1].row(0);
        let mut z = activations[l].matmul_t(w).expect("layer shapes");
        let last = l + 1 == layers;
        for row in z.as_mut_slice().chunks_exact_mut(b.len()) {
            for (zi, bi) in row.iter_mut().zip(b) {
                *zi += bi;
                if !last {
                    *zi = zi.tanh();
                }
            }
        }
        activations.push(z);
    }
    Forward { activations }
}

fn init_layers(shapes: &[ParamShape], rng: &mut impl Rng, gain: f64, bias_std: f64) -> Vec<Matrix> {
    shapes
        .iter()
        .map(|s| match *s {
            ParamShape::Matrix { rows, cols } => {
                Matrix::random_normal(rows, cols, rng).scale(gain / (cols as f64).sqrt())
            }
            ParamShape::Vector { len } => Matrix::random_normal(1, len, rng).scale(bias_std),
        })
        .collect()
}

impl Mlp {
    pub fn new(widths: &[usize], samples: usize, seed: u64) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::Config(format!(
                "mlp needs at least two layers, got widths {widths:?}"
            )));
        }
        if widths.contains(&0) || samples == 0 {
            return Err(Error::Config("mlp widths and samples must be positive".into()));
        }
        let shapes = layer_shapes(widths);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x0D47A));
        let inputs = Matrix::random_normal(samples, widths[0], &mut rng);
        let teacher = init_layers(&shapes, &mut rng, 1.5, 0.1);
        let mut targets = forward(&teacher, &inputs)
            .activations
            .pop()
            .expect("output layer");
        for t in targets.as_mut_slice() {
            let z: f64 = rng.sample(StandardNormal);
            *t += LABEL_NOISE * z;
        }
        Ok(Self {
            widths: widths.to_vec(),
            inputs,
            targets,
            shapes,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    fn samples(&self) -> f64 {
        self.inputs.rows() as f64
    }
}

impl Problem for Mlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn shapes(&self) -> &[ParamShape] {
        &self.shapes
    }

    fn loss(&self, params: &[Matrix]) -> f64 {
        let out = forward(params, &self.inputs).activations.pop().expect("output");
        let r = out.sub(&self.targets).expect("output shape");
        let f = r.frobenius_norm();
        f * f / self.samples()
    }

    fn gradient(&self, params: &[Matrix]) -> Vec<Matrix> {
        let layers = params.len() / 2;
        let fwd = forward(params, &self.inputs);
        let acts = &fwd.activations;
        let mut grads: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();

        // dL/dZ at the (linear) output
        let mut dz = acts[layers]
            .sub(&self.targets)
            .expect("output shape")
            .scale(2.0 / self.samples());
        for l in (0..layers).rev() {
            let h = &acts[l];
            grads[2 * l] = dz.transpose().matmul(h).expect("layer shapes");
            let db = grads[2 * l + 1].row_mut(0);
            for row in dz.row_iter() {
                for (d, x) in db.iter_mut().zip(row) {
                    *d += x;
                }
            }
            if l > 0 {
                let mut dh = dz.matmul(&params[2 * l]).expect("layer shapes");
                // h = tanh(z) so dh/dz = 1 - h²
                for (d, hv) in dh.as_mut_slice().iter_mut().zip(h.as_slice()) {
                    *d *= 1.0 - hv * hv;
                }
                dz = dh;
            }
        }
        grads
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }

    fn init(&self, seed: u64) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        init_layers(&self.shapes, &mut rng, 1.0, 0.0)
    }
}
