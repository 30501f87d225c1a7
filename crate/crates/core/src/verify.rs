//! Self-check suites run by `rmnp verify`.
//!
//! Every suite takes the implementation under test through
//! [`Implementations`], so a deliberately broken function can be swapped in
//! and the suite that catches it is reported by name.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dominance::{self, RowRatios};
use crate::error::Result;
use crate::harness::{run_problem, ProblemKind, RunConfig};
use crate::matrix::{svd, Matrix};
use crate::optim::{OptimizerKind, ScheduleKind};
use crate::precond::{
    apply_inverse_row_factor, exact_orthogonalize, newton_schulz5, rmnp_kronecker_preconditioner, row_normalize,
    NsCoefficients, DEFAULT_RN_EPS,
};
use crate::problems::{derive_seed, numerical_gradient, random_params, relative_error, LogReg, Mlp, Problem, Quadratic};

pub const RN_FROBENIUS: &str = "RN Frobenius lemma";
pub const RN_INNER: &str = "RN inner-product lemma";
pub const RN_INF_TWO: &str = "RN (inf,2) lemma";
pub const KRONECKER: &str = "Kronecker consistency";
pub const NS5_ORACLE: &str = "NS5 oracle";
pub const DOMINANCE_ORACLE: &str = "dominance oracle";
pub const GRADIENT_CHECKS: &str = "gradient checks";
pub const MOMENTUM_RECURSION: &str = "momentum-error recursion";
pub const DESCENT_LEMMA: &str = "descent lemma";

/// Functions exercised by the suites.
#[derive(Clone, Copy)]
pub struct Implementations {
    pub row_normalize: fn(&Matrix, f64) -> Matrix,
    pub row_ratios: fn(&Matrix) -> Result<RowRatios>,
    pub row_ratios_streaming: fn(&Matrix) -> Result<RowRatios>,
    pub newton_schulz: fn(&Matrix, &NsCoefficients) -> Matrix,
}

impl Default for Implementations {
    fn default() -> Self {
        Self {
            row_normalize,
            row_ratios: dominance::row_ratios,
            row_ratios_streaming: dominance::row_ratios_streaming,
            newton_schulz: newton_schulz5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    /// Largest error measure seen, in the suite's own units.
    pub worst: f64,
    pub failure: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Accumulates cases; the first violation is kept as the failure message.
struct Tally {
    name: &'static str,
    cases: usize,
    worst: f64,
    failure: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            worst: 0.0,
            failure: None,
        }
    }

    fn case(&mut self, err: f64, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if err.is_nan() || err > self.worst {
            self.worst = err;
        }
        if !ok && self.failure.is_none() {
            self.failure = Some(what());
        }
    }

    fn fail(&mut self, msg: String) {
        self.cases += 1;
        if self.failure.is_none() {
            self.failure = Some(msg);
        }
    }

    fn done(self) -> SuiteResult {
        SuiteResult {
            name: self.name,
            cases: self.cases,
            worst: self.worst,
            failure: self.failure,
        }
    }
}

fn random_shape(rng: &mut ChaCha8Rng, max_m: usize, max_n: usize) -> (usize, usize) {
    (rng.random_range(1..=max_m), rng.random_range(1..=max_n))
}

pub fn check_rn_frobenius(imp: &Implementations, trials: usize, seed: u64) -> SuiteResult {
    let mut t = Tally::new(RN_FROBENIUS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let (m, n) = random_shape(&mut rng, 64, 256);
        let v = Matrix::random_normal(m, n, &mut rng);
        let d = (imp.row_normalize)(&v, DEFAULT_RN_EPS);
        let err = (d.frobenius_norm() - (m as f64).sqrt()).abs();
        t.case(err, err <= 1e-10, || format!("{m}x{n}: |‖RN(V)‖_F - √m| = {err:e}"));
    }
    t.done()
}

pub fn check_rn_inner(imp: &Implementations, trials: usize, seed: u64) -> SuiteResult {
    let mut t = Tally::new(RN_INNER);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let (m, n) = random_shape(&mut rng, 64, 256);
        let v = Matrix::random_normal(m, n, &mut rng);
        let d = (imp.row_normalize)(&v, DEFAULT_RN_EPS);
        let ip = v.inner(&d).expect("same shape");
        let target = v.one_two_norm();
        let rel = (ip - target).abs() / target;
        // with one nonzero row both sides are equal and only the relative check applies
        let tie = v.row_norms().iter().filter(|&&r| r > 0.0).count() <= 1;
        let ok = rel <= 1e-9 && (tie || ip >= v.frobenius_norm());
        t.case(rel, ok, || {
            format!("{m}x{n}: ⟨V,RN(V)⟩ = {ip:e}, ‖V‖_(1,2) = {target:e}, ‖V‖_F = {:e}", v.frobenius_norm())
        });
    }
    t.done()
}

pub fn check_rn_inf_two(imp: &Implementations, trials: usize, seed: u64) -> SuiteResult {
    let mut t = Tally::new(RN_INF_TWO);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let (m, n) = random_shape(&mut rng, 64, 256);
        let v = Matrix::random_normal(m, n, &mut rng);
        let d = (imp.row_normalize)(&v, DEFAULT_RN_EPS);
        let err = (d.inf_two_norm() - 1.0).abs();
        t.case(err, err <= 1e-12, || format!("{m}x{n}: ‖RN(V)‖_(inf,2) - 1 = {err:e}"));
    }
    t.done()
}

pub fn check_kronecker(imp: &Implementations, trials: usize, seed: u64) -> SuiteResult {
    let mut t = Tally::new(KRONECKER);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let (m, n) = random_shape(&mut rng, 32, 64);
        let v = Matrix::random_normal(m, n, &mut rng);
        let via_factor = match apply_inverse_row_factor(&rmnp_kronecker_preconditioner(&v), &v) {
            Ok(x) => x,
            Err(e) => {
                t.fail(format!("{m}x{n}: {e}"));
                continue;
            }
        };
        let err = via_factor
            .sub(&(imp.row_normalize)(&v, DEFAULT_RN_EPS))
            .expect("same shape")
            .frobenius_norm();
        t.case(err, err <= 1e-12, || format!("{m}x{n}: factor vs RN differ by {err:e}"));
    }
    t.done()
}

/// Random orthogonal matrix from Gram-Schmidt on Gaussian rows.
pub(crate) fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Matrix {
    let mut q = Matrix::random_normal(n, n, rng);
    // two passes for stability
    for _ in 0..2 {
        for i in 0..n {
            for j in 0..i {
                let p: f64 = q.row(i).iter().zip(q.row(j)).map(|(a, b)| a * b).sum();
                let rj = q.row(j).to_vec();
                for (x, y) in q.row_mut(i).iter_mut().zip(&rj) {
                    *x -= p * y;
                }
            }
            let nrm = q.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            q.row_mut(i).iter_mut().for_each(|x| *x /= nrm);
        }
    }
    q
}

/// n×n matrix with singular values spread over `[1, condition]`.
pub(crate) fn conditioned_matrix(n: usize, condition: f64, rng: &mut impl Rng) -> Matrix {
    let u = random_orthogonal(n, rng);
    let w = random_orthogonal(n, rng);
    let s: Vec<f64> = (0..n)
        .map(|i| if n == 1 { 1.0 } else { 1.0 + (condition - 1.0) * i as f64 / (n - 1) as f64 })
        .collect();
    u.matmul(&Matrix::from_diag(&s)).and_then(|us| us.matmul_t(&w)).expect("square shapes")
}

pub fn check_ns5(imp: &Implementations, trials: usize, seed: u64) -> SuiteResult {
    let mut t = Tally::new(NS5_ORACLE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 16;
    let bound = 0.35 * (m as f64).sqrt();
    let coeffs = NsCoefficients::default();
    for k in 0..trials {
        let cond = rng.random_range(1.0..=10.0);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let v = conditioned_matrix(m, cond, &mut rng).scale(scale);
        let ns = (imp.newton_schulz)(&v, &coeffs);
        let polar = match exact_orthogonalize(&v) {
            Ok(p) => p,
            Err(e) => {
                t.fail(format!("case {k}: {e}"));
                continue;
            }
        };
        let dist = ns.sub(&polar).expect("same shape").frobenius_norm();
        let sv = match svd(&ns) {
            Ok(s) => s.singular_values,
            Err(e) => {
                t.fail(format!("case {k}: {e}"));
                continue;
            }
        };
        let in_band = sv.iter().all(|&s| s > 0.2 && s < 1.4);
        t.case(dist, dist <= bound && in_band, || {
            format!(
                "case {k} (cond {cond:.2}): distance {dist:.4} (bound {bound:.4}), singular values [{:.4}, {:.4}]",
                sv.last().copied().unwrap_or(f64::NAN),
                sv.first().copied().unwrap_or(f64::NAN)
            )
        });
    }
    t.done()
}

/// Direct evaluation of the row ratio definition, with no shared code.
fn reference_ratios(v: &Matrix) -> Vec<f64> {
    let m = v.rows();
    let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    (0..m)
        .map(|i| {
            let gii = dotp(v.row(i), v.row(i));
            let off: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| dotp(v.row(i), v.row(j)).abs())
                .sum::<f64>()
                / (m - 1) as f64;
            if off == 0.0 {
                if gii > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                gii / off
            }
        })
        .collect()
}

fn ratio_gap(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            if x == y {
                0.0
            } else {
                (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
            }
        })
        .fold(0.0, f64::max)
}

pub fn check_dominance(imp: &Implementations, trials: usize, seed: u64) -> SuiteResult {
    let mut t = Tally::new(DOMINANCE_ORACLE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths: [(&str, fn(&Matrix) -> Result<RowRatios>); 2] =
        [("gram", imp.row_ratios), ("streaming", imp.row_ratios_streaming)];

    for _ in 0..trials {
        let m = rng.random_range(2..=32);
        let n = rng.random_range(1..=64);
        let v = Matrix::random_normal(m, n, &mut rng);
        let want = reference_ratios(&v);
        let mut results = Vec::new();
        for (label, f) in paths {
            match f(&v) {
                Ok(rr) => {
                    let gap = ratio_gap(&rr.r, &want);
                    t.case(gap, gap <= 1e-9, || format!("{label} path on {m}x{n}: relative gap {gap:e}"));
                    results.push(rr);
                }
                Err(e) => t.fail(format!("{label} path on {m}x{n}: {e}")),
            }
        }
        if let [a, b] = results.as_slice() {
            let (ga, gb) = (
                dominance::aggregate(a, f64::INFINITY),
                dominance::aggregate(b, f64::INFINITY),
            );
            if let (Ok(ga), Ok(gb)) = (ga, gb) {
                let gap = ratio_gap(&[ga.r_avg, ga.r_min, ga.r_max], &[gb.r_avg, gb.r_min, gb.r_max]);
                t.case(gap, gap <= 1e-9, || format!("aggregates on {m}x{n}: relative gap {gap:e}"));
            }
        }
    }

    // equal integer rows: every ratio is exactly one
    let equal = Matrix::from_rows(&[[1.0, 2.0, 2.0]; 4]).expect("literal");
    let orth = Matrix::from_rows(&[[0.0, 3.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 5.0]]).expect("literal");
    for (label, f) in paths {
        match f(&equal) {
            Ok(rr) => t.case(0.0, rr.r.iter().all(|&x| x == 1.0), || {
                format!("{label} path, equal rows: {:?}", rr.r)
            }),
            Err(e) => t.fail(format!("{label} path, equal rows: {e}")),
        }
        match f(&orth) {
            Ok(rr) => {
                let flagged = dominance::aggregate(&rr, dominance::DEFAULT_RATIO_CAP).is_ok_and(|a| a.clamped);
                t.case(0.0, rr.has_infinite() && rr.r.iter().all(|x| x.is_infinite()) && flagged, || {
                    format!("{label} path, orthogonal rows: {:?}", rr.r)
                })
            }
            Err(e) => t.fail(format!("{label} path, orthogonal rows: {e}")),
        }
        t.case(0.0, f(&Matrix::zeros(1, 3)).is_err(), || {
            format!("{label} path accepted a single-row matrix")
        });
    }
    t.done()
}

pub fn check_gradients(points: usize, seed: u64) -> SuiteResult {
    let mut t = Tally::new(GRADIENT_CHECKS);
    let problems: Vec<(Box<dyn Problem>, f64)> = vec![
        (Box::new(Quadratic::new(4, 5, 10.0).expect("valid")), 1.0),
        (Box::new(LogReg::new(30, 7, 0.01, seed).expect("valid")), 1.0),
        (Box::new(Mlp::new(&[4, 2, 1], 12, seed).expect("valid")), 0.8),
        (Box::new(Mlp::new(&[3, 5, 4, 2], 10, seed).expect("valid")), 0.7),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6AD));
    for (p, scale) in &problems {
        for k in 0..points {
            let w = random_params(p.shapes(), &mut rng, *scale);
            let fd = numerical_gradient(p.as_ref(), &w, 1e-5);
            let err = relative_error(&p.gradient(&w), &fd, 1e-8);
            t.case(err, err <= 1e-5, || format!("{} point {k}: relative error {err:e}", p.name()));
        }
    }
    t.done()
}

fn plain_quadratic(m: usize, n: usize, steps: u64, lr: f64, beta: f64, seed: u64) -> RunConfig {
    RunConfig {
        problem: ProblemKind::Quadratic,
        m,
        n,
        condition: 10.0,
        optimizer: OptimizerKind::Rmnp,
        lr_matrix: lr,
        beta,
        weight_decay: 0.0,
        rms_scaling: false,
        schedule: ScheduleKind::Constant,
        steps,
        sigma: 0.0,
        seed,
        ..RunConfig::default()
    }
}

/// `E_t = V_t − ∇f(W_t)` against `βE_{t−1} + β(∇f(W_{t−1}) − ∇f(W_t)) + (1−β)ξ_t`.
pub fn check_momentum_recursion(steps: u64, seed: u64) -> SuiteResult {
    let mut t = Tally::new(MOMENTUM_RECURSION);
    let beta = 0.9;
    let cfg = plain_quadratic(8, 32, steps, 0.01, beta, seed);
    let problem = match cfg.problem_spec().build(cfg.data_seed()) {
        Ok(p) => p,
        Err(e) => {
            t.fail(e.to_string());
            return t.done();
        }
    };
    let mut prev: Option<(Matrix, Matrix)> = None;
    let run = run_problem(&cfg, problem.as_ref(), |view| {
        let v = view.optimizer.momentum(0).expect("matrix slot");
        let grad = &view.grad_true[0];
        let xi = view.grad_used[0].sub(grad).expect("same shape");
        let e = v.sub(grad).expect("same shape");
        let predicted = match &prev {
            Some((e_prev, g_prev)) => {
                let mut p = e_prev.scale(beta);
                p.axpy(beta, &g_prev.sub(grad).expect("same shape")).expect("same shape");
                p.axpy(1.0 - beta, &xi).expect("same shape");
                p
            }
            // V_0 = 0, so E_1 = (1−β)G_1 − ∇f(W_1)
            None => {
                let mut p = view.grad_used[0].scale(1.0 - beta);
                p.axpy(-1.0, grad).expect("same shape");
                p
            }
        };
        let res = e.sub(&predicted).expect("same shape").frobenius_norm();
        t.case(res, res < 1e-10, || format!("step {}: residual {res:e}", view.step));
        prev = Some((e, grad.clone()));
    });
    if let Err(e) = run {
        t.fail(e.to_string());
    }
    t.done()
}

/// RMNP with β = 0 and a step satisfying `η < 2‖∇f‖_(1,2)/(L_F m)` decreases
/// the loss by at least `η⟨∇f, D⟩ − L_F η² m / 2` each step.
pub fn check_descent(steps: u64, seed: u64) -> SuiteResult {
    let mut t = Tally::new(DESCENT_LEMMA);
    let (m, n, eta) = (8, 32, 0.01);
    let cfg = plain_quadratic(m, n, steps, eta, 0.0, seed);
    let problem = match cfg.problem_spec().build(cfg.data_seed()) {
        Ok(p) => p,
        Err(e) => {
            t.fail(e.to_string());
            return t.done();
        }
    };
    let l_f = problem.smoothness().expect("quadratic is smooth");
    let run = run_problem(&cfg, problem.as_ref(), |view| {
        let before = problem.loss(view.params_before);
        let after = problem.loss(view.params);
        let grad = &view.grad_true[0];
        let d = view.optimizer.direction(0).expect("matrix slot");
        let bound = eta * grad.inner(d).expect("same shape") - l_f * eta * eta * m as f64 / 2.0;
        let admissible = eta < 2.0 * grad.one_two_norm() / (l_f * m as f64);
        let slack = 1e-12 * before.abs().max(1.0);
        let drop = before - after;
        t.case(bound - drop, admissible && after < before && drop >= bound - slack, || {
            format!(
                "step {}: loss {before:e} -> {after:e}, guaranteed drop {bound:e}, step admissible: {admissible}",
                view.step
            )
        });
    });
    if let Err(e) = run {
        t.fail(e.to_string());
    }
    t.done()
}

/// Every suite with its default workload.
pub fn run_suites(imp: &Implementations, seed: u64) -> Vec<SuiteResult> {
    let s = |k| derive_seed(seed, k);
    vec![
        check_rn_frobenius(imp, 1000, s(1)),
        check_rn_inner(imp, 1000, s(2)),
        check_rn_inf_two(imp, 1000, s(3)),
        check_kronecker(imp, 200, s(4)),
        check_ns5(imp, 100, s(5)),
        check_dominance(imp, 200, s(6)),
        check_gradients(10, s(7)),
        check_momentum_recursion(50, s(8)),
        check_descent(100, s(9)),
    ]
}

pub fn verify(seed: u64) -> Vec<SuiteResult> {
    run_suites(&Implementations::default(), seed)
}
