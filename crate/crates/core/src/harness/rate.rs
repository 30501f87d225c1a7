//! Empirical check of the stationarity rate under the prescribed
//! step size and momentum.
//!
//! For horizon `T` with `B = 1`:
//!
//! ```text
//! 1 - β = min{ √(L_F Δ) / ((√m + 1) σ √T), 1 }
//! η     = √((1 - β) Δ / (L_F m T))
//! ```
//!
//! with `Δ = f(W_0) − f*`. The run uses a constant rate, no weight decay and
//! no RMS scaling, and reports the running average of `‖∇f(W_t)‖_F`.
//!
//! Under (∞,2) smoothness, `‖∇f(X) − ∇f(Y)‖_{1,2} ≤ L_{∞,2} ‖X − Y‖_{∞,2}`,
//! the prescriptions become
//!
//! ```text
//! 1 - β = min{ √(L_{∞,2} Δ) / (2 √m σ √T), 1 }
//! η     = √((1 - β) Δ / (L_{∞,2} T))
//! ```
//!
//! and the tracked quantity is `‖∇f(W_t)‖_{1,2}`. No problem here knows its
//! `L_{∞,2}`, so it is estimated by sampling (see
//! [`estimate_inf2_smoothness`]); the estimate is a lower bound on the true
//! constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::{Optimizer, OptimizerConfig, OptimizerKind, ParamShape};
use crate::problems::{total_frobenius, total_one_two, NoiseModel, Problem};

/// Which smoothness assumption sets `(η, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateGeometry {
    #[default]
    Frobenius,
    InfTwo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub total_steps: u64,
    pub eta: f64,
    pub beta: f64,
    pub avg_grad_norm_f: f64,
    pub avg_grad_norm_12: f64,
}

/// `(η, β)` for horizon `t`. `σ` is the per-sample noise level and `batch`
/// divides its variance. `1 − β` is kept at least `1/T` so that β < 1.
pub fn prescribed_hyperparameters(l_f: f64, delta: f64, m: usize, sigma: f64, batch: usize, t: u64) -> (f64, f64) {
    let t = t as f64;
    let sigma_eff = sigma / (batch as f64).sqrt();
    let raw = if sigma_eff > 0.0 {
        (l_f * delta).sqrt() / (((m as f64).sqrt() + 1.0) * sigma_eff * t.sqrt())
    } else {
        1.0
    };
    let one_minus_beta = raw.min(1.0).max(1.0 / t);
    let eta = (one_minus_beta * delta / (l_f * m as f64 * t)).sqrt();
    (eta, 1.0 - one_minus_beta)
}

/// `(η, β)` under (∞,2) smoothness with constant `l_inf2`.
pub fn prescribed_hyperparameters_inf2(
    l_inf2: f64,
    delta: f64,
    m: usize,
    sigma: f64,
    batch: usize,
    t: u64,
) -> (f64, f64) {
    let t = t as f64;
    let sigma_eff = sigma / (batch as f64).sqrt();
    let raw = if sigma_eff > 0.0 {
        (l_inf2 * delta).sqrt() / (2.0 * (m as f64).sqrt() * sigma_eff * t.sqrt())
    } else {
        1.0
    };
    let one_minus_beta = raw.min(1.0).max(1.0 / t);
    let eta = (one_minus_beta * delta / (l_inf2 * t)).sqrt();
    (eta, 1.0 - one_minus_beta)
}

/// Largest observed `‖∇f(X) − ∇f(Y)‖_{1,2} / ‖X − Y‖_{∞,2}` over `pairs`
/// random pairs near `around`. Every row of `X − Y` has the same norm, which
/// puts the difference on the boundary of an (∞,2) ball.
pub fn estimate_inf2_smoothness(problem: &dyn Problem, around: &[Matrix], pairs: usize, seed: u64) -> Result<f64> {
    if pairs == 0 {
        return Err(Error::Config("need at least one sample pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let x: Vec<Matrix> = around
            .iter()
            .map(|w| {
                let jitter = Matrix::random_normal(w.rows(), w.cols(), &mut rng).scale(0.1 * (1.0 + w.frobenius_norm()));
                w.add(&jitter)
            })
            .collect::<Result<_>>()?;
        let radius = 10f64.powf(rng.random_range(-3.0..0.0));
        let mut y = x.clone();
        let mut dist: f64 = 0.0;
        for w in &mut y {
            let mut d = Matrix::random_normal(w.rows(), w.cols(), &mut rng);
            for i in 0..d.rows() {
                let r = d.row_mut(i);
                let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.iter_mut().for_each(|v| *v *= radius / norm);
            }
            dist = dist.max(d.inf_two_norm());
            w.axpy(1.0, &d)?;
        }
        let gx = problem.gradient(&x);
        let gy = problem.gradient(&y);
        let num: f64 = gx
            .iter()
            .zip(&gy)
            .map(|(a, b)| a.sub(b).map(|d| d.one_two_norm()))
            .sum::<Result<f64>>()?;
        best = best.max(num / dist);
    }
    Ok(best)
}

fn largest_rows(shapes: &[ParamShape]) -> usize {
    shapes.iter().map(|s| s.dims().0).max().unwrap_or(1)
}

fn initial_gap(problem: &dyn Problem, init: &[Matrix]) -> Result<f64> {
    let f_star = problem
        .lower_bound()
        .ok_or_else(|| Error::Config(format!("'{}' has no lower bound", problem.name())))?;
    Ok((problem.loss(init) - f_star).max(0.0))
}

/// Runs one horizon and returns the averages of the true gradient norms.
pub fn run_horizon(
    problem: &dyn Problem,
    kind: OptimizerKind,
    init: &[Matrix],
    noise: &NoiseModel,
    total_steps: u64,
) -> Result<RatePoint> {
    let l_f = problem
        .smoothness()
        .ok_or_else(|| Error::Config(format!("'{}' has no smoothness constant", problem.name())))?;
    let delta = initial_gap(problem, init)?;
    let m = largest_rows(problem.shapes());
    let (eta, beta) = prescribed_hyperparameters(l_f, delta, m, noise.sigma, noise.batch, total_steps);
    run_prescribed(problem, kind, init, noise, total_steps, eta, beta)
}

/// [`run_horizon`] with the (∞,2) prescriptions for a given `l_inf2`.
pub fn run_horizon_inf2(
    problem: &dyn Problem,
    kind: OptimizerKind,
    init: &[Matrix],
    noise: &NoiseModel,
    total_steps: u64,
    l_inf2: f64,
) -> Result<RatePoint> {
    if !(l_inf2 > 0.0) {
        return Err(Error::Config(format!("L_(inf,2) must be positive, got {l_inf2}")));
    }
    let delta = initial_gap(problem, init)?;
    let m = largest_rows(problem.shapes());
    let (eta, beta) = prescribed_hyperparameters_inf2(l_inf2, delta, m, noise.sigma, noise.batch, total_steps);
    run_prescribed(problem, kind, init, noise, total_steps, eta, beta)
}

fn run_prescribed(
    problem: &dyn Problem,
    kind: OptimizerKind,
    init: &[Matrix],
    noise: &NoiseModel,
    total_steps: u64,
    eta: f64,
    beta: f64,
) -> Result<RatePoint> {
    if total_steps == 0 {
        return Err(Error::Config("rate check horizons must be positive".into()));
    }
    noise.validate()?;
    let cfg = OptimizerConfig {
        kind,
        // base rates are placeholders; η is passed to each step directly
        lr_matrix: 1.0,
        lr_adamw: 1.0,
        beta,
        weight_decay: 0.0,
        rms_scaling: false,
        ..OptimizerConfig::default()
    };
    let mut opt = Optimizer::new(cfg, problem.shapes())?;
    let mut params = init.to_vec();
    let (mut sum_f, mut sum_12) = (0.0, 0.0);
    for t in 1..=total_steps {
        let grad = problem.gradient(&params);
        sum_f += total_frobenius(&grad);
        sum_12 += total_one_two(&grad);
        let mut g = grad;
        noise.perturb(&mut g, t);
        opt.step(&mut params, &g, eta, eta)?;
    }
    let loss = problem.loss(&params);
    if !loss.is_finite() {
        return Err(Error::Divergence {
            step: total_steps,
            loss,
        });
    }
    Ok(RatePoint {
        total_steps,
        eta,
        beta,
        avg_grad_norm_f: sum_f / total_steps as f64,
        avg_grad_norm_12: sum_12 / total_steps as f64,
    })
}

/// One [`RatePoint`] per horizon, each run from the same initial point and
/// noise stream.
pub fn rate_trend_check(
    problem: &dyn Problem,
    kind: OptimizerKind,
    horizons: &[u64],
    noise: &NoiseModel,
    init_seed: u64,
) -> Result<Vec<RatePoint>> {
    let init = problem.init(init_seed);
    horizons
        .iter()
        .map(|&t| run_horizon(problem, kind, &init, noise, t))
        .collect()
}

/// The (∞,2) counterpart of [`rate_trend_check`]. Also returns the sampled
/// `L_{∞,2}` estimate, taken around the shared initial point.
pub fn rate_trend_check_inf2(
    problem: &dyn Problem,
    kind: OptimizerKind,
    horizons: &[u64],
    noise: &NoiseModel,
    init_seed: u64,
    pairs: usize,
) -> Result<(f64, Vec<RatePoint>)> {
    let init = problem.init(init_seed);
    let l_inf2 = estimate_inf2_smoothness(problem, &init, pairs, init_seed ^ 0x5eed)?;
    let points = horizons
        .iter()
        .map(|&t| run_horizon_inf2(problem, kind, &init, noise, t, l_inf2))
        .collect::<Result<_>>()?;
    Ok((l_inf2, points))
}

impl RateGeometry {
    /// The running average this geometry's bound is stated in.
    pub fn tracked(self, p: &RatePoint) -> f64 {
        match self {
            Self::Frobenius => p.avg_grad_norm_f,
            Self::InfTwo => p.avg_grad_norm_12,
        }
    }
}

/// Whether each rung is at most `(1 + slack)` times the previous one, in
/// the Frobenius average.
pub fn is_nonincreasing(points: &[RatePoint], slack: f64) -> bool {
    is_nonincreasing_in(points, slack, RateGeometry::Frobenius)
}

pub fn is_nonincreasing_in(points: &[RatePoint], slack: f64, geometry: RateGeometry) -> bool {
    points
        .windows(2)
        .all(|w| geometry.tracked(&w[1]) <= (1.0 + slack) * geometry.tracked(&w[0]))
}
