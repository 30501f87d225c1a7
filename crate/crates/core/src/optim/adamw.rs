use crate::error::Result;
use crate::matrix::Matrix;

use super::OptimizerConfig;

/// First/second moment buffers for one AdamW-managed parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    step: u64,
    m: Matrix,
    v: Matrix,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            step: 0,
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Matrix {
        &self.m
    }

    pub fn second_moment(&self) -> &Matrix {
        &self.v
    }

    /// Decoupled-weight-decay AdamW update of `w` in place.
    pub fn update(&mut self, w: &mut Matrix, g: &Matrix, cfg: &OptimizerConfig, lr: f64) -> Result<()> {
        w.ensure_same_shape(g, "adamw_step")?;
        self.m.ensure_same_shape(g, "adamw_step")?;
        self.step += 1;
        let (b1, b2) = cfg.adamw_betas;
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        let decay = 1.0 - lr * cfg.weight_decay;
        let eps = cfg.eps;
        let it = w
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(self.m.as_mut_slice().iter_mut().zip(self.v.as_mut_slice()));
        for ((wi, &gi), (mi, vi)) in it {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *wi = decay * *wi - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Returns the updated parameter; `state` advances one step.
pub fn adamw_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut AdamState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<Matrix> {
    let mut out = w.clone();
    state.update(&mut out, g, cfg, lr_t)?;
    Ok(out)
}
