//! Stateful optimizers: RMNP, Muon, momentum SGD and AdamW, plus the mixed
//! strategy that routes matrix-shaped parameters to a matrix optimizer and
//! everything else to AdamW.
//!
//! The matrix optimizers share one update:
//!
//! ```text
//! V_t     = β V_{t-1} + (1 - β) G_t
//! D_t     = P(V_t)                      (RN, NS₅ or identity)
//! W_{t+1} = (1 - η_t λ) W_t - η_eff D_t,   η_eff = η_t · max(1, √(n/m)) with RMS scaling
//! ```
//!
//! Momentum is a plain EMA without bias correction or Nesterov lookahead.

mod adamw;
mod schedule;

pub use adamw::{adamw_step, AdamState};
pub use schedule::{schedule_lr, Schedule, ScheduleKind};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::precond::{NsCoefficients, Preconditioner, PreconditionerKind, DEFAULT_RN_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Rmnp,
    Muon,
    #[serde(rename = "adamw")]
    AdamW,
    MomentumSgd,
}

impl OptimizerKind {
    /// Preconditioner used on matrix parameters, `None` for pure AdamW.
    pub fn preconditioner(self) -> Option<PreconditionerKind> {
        match self {
            Self::Rmnp => Some(PreconditionerKind::RowNormalize),
            Self::Muon => Some(PreconditionerKind::NewtonSchulz5),
            Self::MomentumSgd => Some(PreconditionerKind::Identity),
            Self::AdamW => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Rmnp => "rmnp",
            Self::Muon => "muon",
            Self::AdamW => "adamw",
            Self::MomentumSgd => "momentum_sgd",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rmnp" => Ok(Self::Rmnp),
            "muon" => Ok(Self::Muon),
            "adamw" => Ok(Self::AdamW),
            "momentum_sgd" | "sgd" => Ok(Self::MomentumSgd),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr_matrix: f64,
    pub lr_adamw: f64,
    /// Momentum coefficient of the matrix optimizers.
    pub beta: f64,
    pub adamw_betas: (f64, f64),
    pub weight_decay: f64,
    pub rms_scaling: bool,
    /// AdamW denominator guard.
    pub eps: f64,
    pub ns_coeffs: NsCoefficients,
    pub rn_eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Rmnp,
            lr_matrix: 0.02,
            lr_adamw: 0.003,
            beta: 0.95,
            adamw_betas: (0.9, 0.95),
            weight_decay: 0.1,
            rms_scaling: true,
            eps: 1e-8,
            ns_coeffs: NsCoefficients::default(),
            rn_eps: DEFAULT_RN_EPS,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1)", self.beta));
        }
        let (b1, b2) = self.adamw_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return bad(format!("adamw_betas ({b1}, {b2}) outside [0, 1)"));
        }
        if !(self.lr_matrix > 0.0 && self.lr_matrix.is_finite()) {
            return bad(format!("lr_matrix {} must be > 0", self.lr_matrix));
        }
        if !(self.lr_adamw > 0.0 && self.lr_adamw.is_finite()) {
            return bad(format!("lr_adamw {} must be > 0", self.lr_adamw));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {} must be >= 0", self.weight_decay));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps {} must be > 0", self.eps));
        }
        if !(self.rn_eps >= 0.0) {
            return bad(format!("rn_eps {} must be >= 0", self.rn_eps));
        }
        self.ns_coeffs.validate()
    }

    /// Learning rate actually applied to an m×n matrix at base rate `lr_t`.
    pub fn effective_lr(&self, lr_t: f64, rows: usize, cols: usize) -> f64 {
        if self.rms_scaling {
            lr_t * (cols as f64 / rows as f64).sqrt().max(1.0)
        } else {
            lr_t
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamShape {
    Matrix { rows: usize, cols: usize },
    Vector { len: usize },
}

impl ParamShape {
    /// Storage shape; vectors are kept as a single row.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Self::Matrix { rows, cols } => (rows, cols),
            Self::Vector { len } => (1, len),
        }
    }

    pub fn numel(&self) -> usize {
        let (m, n) = self.dims();
        m * n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamGroup {
    pub id: usize,
    /// `true` routes the parameter to the matrix optimizer, `false` to AdamW.
    pub matrix: bool,
    pub shape: ParamShape,
}

impl ParamGroup {
    /// Two-dimensional with both dimensions above one goes to the matrix
    /// optimizer; vectors and degenerate matrices go to AdamW.
    pub fn classify(id: usize, shape: ParamShape) -> Self {
        let matrix = matches!(shape, ParamShape::Matrix { rows, cols } if rows > 1 && cols > 1);
        Self { id, matrix, shape }
    }
}

/// EMA momentum buffer of one matrix parameter. Starts at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    step: u64,
    momentum: Matrix,
}

impl MomentumState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            step: 0,
            momentum: Matrix::zeros(rows, cols),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn momentum(&self) -> &Matrix {
        &self.momentum
    }

    /// `V_t = β V_{t-1} + (1-β) G_t`.
    pub fn update(&mut self, g: &Matrix, beta: f64) -> Result<&Matrix> {
        self.momentum.ensure_same_shape(g, "momentum_update")?;
        for (v, &gi) in self.momentum.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *v = beta * *v + (1.0 - beta) * gi;
        }
        self.step += 1;
        Ok(&self.momentum)
    }

    /// Momentum error `E_t = V_t - ∇f(W_t)`.
    pub fn error(&self, grad_true: &Matrix) -> Result<Matrix> {
        self.momentum.sub(grad_true)
    }
}

pub fn momentum_update(state: &mut MomentumState, g: &Matrix, beta: f64) -> Result<Matrix> {
    state.update(g, beta).cloned()
}

pub fn momentum_error(state: &MomentumState, grad_true: &Matrix) -> Result<Matrix> {
    state.error(grad_true)
}

/// Decoupled decay followed by the scaled preconditioned step, in place.
pub fn apply_matrix_update(w: &mut Matrix, direction: &Matrix, cfg: &OptimizerConfig, lr_t: f64) -> Result<()> {
    w.ensure_same_shape(direction, "apply_matrix_update")?;
    let decay = 1.0 - lr_t * cfg.weight_decay;
    let eta = cfg.effective_lr(lr_t, w.rows(), w.cols());
    for (wi, &di) in w.as_mut_slice().iter_mut().zip(direction.as_slice()) {
        *wi = decay * *wi - eta * di;
    }
    Ok(())
}

fn matrix_step(
    kind: PreconditionerKind,
    w: &Matrix,
    g: &Matrix,
    state: &mut MomentumState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<Matrix> {
    if !(lr_t >= 0.0) {
        return Err(Error::Config(format!("lr_t {lr_t} must be >= 0")));
    }
    w.ensure_same_shape(g, "matrix_step")?;
    let v = state.update(g, cfg.beta)?;
    let mut direction = Matrix::zeros(v.rows(), v.cols());
    Preconditioner::new(kind, cfg.rn_eps, cfg.ns_coeffs).apply_into(v, &mut direction);
    let mut out = w.clone();
    apply_matrix_update(&mut out, &direction, cfg, lr_t)?;
    Ok(out)
}

/// One RMNP step; returns `W_{t+1}`.
pub fn rmnp_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut MomentumState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<Matrix> {
    matrix_step(PreconditionerKind::RowNormalize, w, g, state, cfg, lr_t)
}

/// One Muon step; returns `W_{t+1}`.
pub fn muon_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut MomentumState,
    cfg: &OptimizerConfig,
    lr_t: f64,
) -> Result<Matrix> {
    matrix_step(PreconditionerKind::NewtonSchulz5, w, g, state, cfg, lr_t)
}

#[derive(Debug, Clone)]
enum Slot {
    Matrix {
        state: MomentumState,
        direction: Matrix,
    },
    Adam(AdamState),
}

/// Mixed-strategy optimizer over a fixed list of parameters.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    groups: Vec<ParamGroup>,
    slots: Vec<Slot>,
    precond: Option<Preconditioner>,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, shapes: &[ParamShape]) -> Result<Self> {
        config.validate()?;
        let precond = config
            .kind
            .preconditioner()
            .map(|k| Preconditioner::new(k, config.rn_eps, config.ns_coeffs));
        let groups: Vec<ParamGroup> = shapes
            .iter()
            .enumerate()
            .map(|(id, &s)| ParamGroup::classify(id, s))
            .collect();
        let slots = groups
            .iter()
            .map(|g| {
                let (m, n) = g.shape.dims();
                if g.matrix && precond.is_some() {
                    Slot::Matrix {
                        state: MomentumState::new(m, n),
                        direction: Matrix::zeros(m, n),
                    }
                } else {
                    Slot::Adam(AdamState::new(m, n))
                }
            })
            .collect();
        Ok(Self {
            config,
            groups,
            slots,
            precond,
            steps: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Whether parameter `idx` is stepped by the matrix optimizer.
    pub fn is_matrix_managed(&self, idx: usize) -> bool {
        matches!(self.slots.get(idx), Some(Slot::Matrix { .. }))
    }

    /// Current momentum `V_t` of a matrix-managed parameter.
    pub fn momentum(&self, idx: usize) -> Option<&Matrix> {
        match self.slots.get(idx)? {
            Slot::Matrix { state, .. } => Some(state.momentum()),
            Slot::Adam(_) => None,
        }
    }

    pub fn momentum_state(&self, idx: usize) -> Option<&MomentumState> {
        match self.slots.get(idx)? {
            Slot::Matrix { state, .. } => Some(state),
            Slot::Adam(_) => None,
        }
    }

    /// Preconditioned direction `D_t` from the most recent step.
    pub fn direction(&self, idx: usize) -> Option<&Matrix> {
        match self.slots.get(idx)? {
            Slot::Matrix { direction, .. } => Some(direction),
            Slot::Adam(_) => None,
        }
    }

    /// Steps every parameter with its gradient. `lr_matrix` and `lr_adamw`
    /// are the scheduled base rates for this step.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr_matrix: f64, lr_adamw: f64) -> Result<()> {
        if params.len() != self.slots.len() || grads.len() != self.slots.len() {
            return Err(Error::Dimension {
                op: "optimizer_step",
                expected: (self.slots.len(), 1),
                found: (params.len(), grads.len()),
            });
        }
        let cfg = self.config;
        for ((slot, w), g) in self.slots.iter_mut().zip(params.iter_mut()).zip(grads) {
            w.ensure_same_shape(g, "optimizer_step")?;
            match slot {
                Slot::Matrix { state, direction } => {
                    let v = state.update(g, cfg.beta)?;
                    self.precond
                        .as_mut()
                        .expect("matrix slots exist only with a preconditioner")
                        .apply_into(v, direction);
                    apply_matrix_update(w, direction, &cfg, lr_matrix)?;
                }
                Slot::Adam(state) => state.update(w, g, &cfg, lr_adamw)?,
            }
        }
        self.steps += 1;
        Ok(())
    }
}
