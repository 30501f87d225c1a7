use crate::dominance::{self, DominanceReport, GlobalDominance};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::optim::{Optimizer, OptimizerKind};
use crate::problems::{total_frobenius, total_one_two, Problem};

use super::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub step: u64,
    pub lr: f64,
    /// Loss and true-gradient norms at the iterate the step started from.
    pub loss: f64,
    pub grad_norm_f: f64,
    /// Sum of per-parameter (1,2)-norms.
    pub grad_norm_12: f64,
    /// ‖W_{t+1} − W_t‖_F over all parameters.
    pub update_norm_f: f64,
    /// One report per matrix-managed parameter, computed on V_t.
    pub dominance: Vec<DominanceReport>,
    pub global: Option<GlobalDominance>,
}

#[derive(Debug, Clone)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub final_params: Vec<Matrix>,
    pub dominance: bool,
}

/// What an observer sees right after step `t` has been applied.
pub struct StepView<'a> {
    pub step: u64,
    /// Parameters before the step, W_t.
    pub params_before: &'a [Matrix],
    /// Parameters after the step, W_{t+1}.
    pub params: &'a [Matrix],
    pub grad_true: &'a [Matrix],
    pub grad_used: &'a [Matrix],
    pub optimizer: &'a Optimizer,
    /// Present when this step was logged.
    pub record: Option<&'a TrainRecord>,
}

pub fn run_training(cfg: &RunConfig) -> Result<TrainLog> {
    run_training_observed(cfg, |_| {})
}

pub fn run_training_observed(cfg: &RunConfig, observer: impl FnMut(&StepView<'_>)) -> Result<TrainLog> {
    cfg.validate()?;
    let problem = cfg.problem_spec().build(cfg.data_seed())?;
    run_problem(cfg, problem.as_ref(), observer)
}

/// Runs `cfg`'s optimizer and schedule on an already built problem.
pub fn run_problem(
    cfg: &RunConfig,
    problem: &dyn Problem,
    mut observer: impl FnMut(&StepView<'_>),
) -> Result<TrainLog> {
    cfg.validate()?;
    let mut params = problem.init(cfg.init_seed());
    let mut opt = Optimizer::new(cfg.optimizer_config(), problem.shapes())?;
    let matrix_ids: Vec<usize> = (0..params.len()).filter(|&i| opt.is_matrix_managed(i)).collect();
    if cfg.dominance && matrix_ids.is_empty() {
        return Err(Error::Config(format!(
            "dominance logging needs matrix parameters, but {} on '{}' has none",
            cfg.optimizer,
            problem.name()
        )));
    }
    let sched_m = cfg.matrix_schedule();
    let sched_a = cfg.adamw_schedule();
    let noise = cfg.noise();
    let mut records = Vec::new();

    for t in 1..=cfg.steps {
        let loss = problem.loss(&params);
        if !loss.is_finite() {
            return Err(Error::Divergence { step: t, loss });
        }
        let grad = problem.gradient(&params);
        let mut g = grad.clone();
        noise.perturb(&mut g, t);
        let lr_m = sched_m.lr(t)?;
        let lr_a = sched_a.lr(t)?;
        let before = params.clone();
        opt.step(&mut params, &g, lr_m, lr_a)?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { step: t, loss: f64::NAN });
        }

        let logged = t % cfg.log_every == 0;
        let record = if logged {
            let diff: Vec<Matrix> = params
                .iter()
                .zip(&before)
                .map(|(a, b)| a.sub(b))
                .collect::<Result<_>>()?;
            let mut reports = Vec::new();
            if cfg.dominance {
                for &i in &matrix_ids {
                    let v = opt.momentum(i).expect("matrix slot");
                    reports.push(dominance::report(t, i, v, cfg.dominance_cap)?);
                }
            }
            let global = if reports.is_empty() {
                None
            } else {
                Some(dominance::global_aggregate(&reports)?)
            };
            Some(TrainRecord {
                step: t,
                lr: if cfg.optimizer == OptimizerKind::AdamW { lr_a } else { lr_m },
                loss,
                grad_norm_f: total_frobenius(&grad),
                grad_norm_12: total_one_two(&grad),
                update_norm_f: total_frobenius(&diff),
                dominance: reports,
                global,
            })
        } else {
            None
        };
        observer(&StepView {
            step: t,
            params_before: &before,
            params: &params,
            grad_true: &grad,
            grad_used: &g,
            optimizer: &opt,
            record: record.as_ref(),
        });
        records.extend(record);
    }
    Ok(TrainLog {
        records,
        final_params: params,
        dominance: cfg.dominance,
    })
}
