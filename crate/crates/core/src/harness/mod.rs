//! Experiment orchestration: preconditioner microbenchmarks, training runs
//! with convergence and dominance logging, the rate check, and CSV output.

pub mod bench;
pub mod config;
pub mod csv_io;
pub mod rate;
pub mod train;

pub use bench::{bench_preconditioner, bench_scaling, bench_scaling_with, bench_with, fit_loglog_slope, BenchRecord, ScalingFit};
pub use config::{ProblemKind, RunConfig};
pub use rate::{
    estimate_inf2_smoothness, is_nonincreasing, is_nonincreasing_in, prescribed_hyperparameters,
    prescribed_hyperparameters_inf2, rate_trend_check, rate_trend_check_inf2, RateGeometry, RatePoint,
};
pub use train::{run_problem, run_training, run_training_observed, StepView, TrainLog, TrainRecord};
