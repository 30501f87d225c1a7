use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{OptimizerConfig, OptimizerKind, Schedule, ScheduleKind};
use crate::precond::{NsCoefficients, DEFAULT_RN_EPS};
use crate::problems::{derive_seed, NoiseModel, ProblemSpec};
use crate::dominance::DEFAULT_RATIO_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    #[default]
    Quadratic,
    Logreg,
    Mlp,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" => Ok(Self::Quadratic),
            "logreg" => Ok(Self::Logreg),
            "mlp" => Ok(Self::Mlp),
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

// seed purposes
const DATA: u64 = 1;
const INIT: u64 = 2;
const NOISE: u64 = 3;

/// One training run, as a flat key/value table. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub m: usize,
    pub n: usize,
    pub condition: f64,
    pub samples: usize,
    pub features: usize,
    pub reg: f64,
    pub widths: Vec<usize>,

    pub optimizer: OptimizerKind,
    pub lr_matrix: f64,
    pub lr_adamw: f64,
    pub beta: f64,
    pub adamw_beta1: f64,
    pub adamw_beta2: f64,
    pub weight_decay: f64,
    pub rms_scaling: bool,
    pub eps: f64,
    pub rn_eps: f64,
    pub ns_a: f64,
    pub ns_b: f64,
    pub ns_c: f64,
    pub ns_iterations: usize,

    pub schedule: ScheduleKind,
    pub warmup_fraction: f64,
    pub steps: u64,
    pub sigma: f64,
    pub batch: usize,
    pub seed: u64,
    pub log_every: u64,
    pub dominance: bool,
    pub dominance_cap: f64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let o = OptimizerConfig::default();
        let ns = NsCoefficients::default();
        Self {
            problem: ProblemKind::Quadratic,
            m: 16,
            n: 64,
            condition: 10.0,
            samples: 64,
            features: 8,
            reg: 1e-3,
            widths: vec![8, 32, 32, 4],
            optimizer: o.kind,
            lr_matrix: o.lr_matrix,
            lr_adamw: o.lr_adamw,
            beta: o.beta,
            adamw_beta1: o.adamw_betas.0,
            adamw_beta2: o.adamw_betas.1,
            weight_decay: o.weight_decay,
            rms_scaling: o.rms_scaling,
            eps: o.eps,
            rn_eps: DEFAULT_RN_EPS,
            ns_a: ns.a,
            ns_b: ns.b,
            ns_c: ns.c,
            ns_iterations: ns.iterations,
            schedule: ScheduleKind::CosineWarmup,
            warmup_fraction: 0.1,
            steps: 200,
            sigma: 0.0,
            batch: 1,
            seed: 0,
            log_every: 1,
            dominance: false,
            dominance_cap: DEFAULT_RATIO_CAP,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        match self.problem {
            ProblemKind::Quadratic => ProblemSpec::Quadratic {
                m: self.m,
                n: self.n,
                condition: self.condition,
            },
            ProblemKind::Logreg => ProblemSpec::Logreg {
                samples: self.samples,
                features: self.features,
                reg: self.reg,
            },
            ProblemKind::Mlp => ProblemSpec::Mlp {
                widths: self.widths.clone(),
                samples: self.samples,
            },
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.optimizer,
            lr_matrix: self.lr_matrix,
            lr_adamw: self.lr_adamw,
            beta: self.beta,
            adamw_betas: (self.adamw_beta1, self.adamw_beta2),
            weight_decay: self.weight_decay,
            rms_scaling: self.rms_scaling,
            eps: self.eps,
            ns_coeffs: NsCoefficients {
                a: self.ns_a,
                b: self.ns_b,
                c: self.ns_c,
                iterations: self.ns_iterations,
            },
            rn_eps: self.rn_eps,
        }
    }

    fn schedule_for(&self, base_lr: f64) -> Schedule {
        Schedule {
            kind: self.schedule,
            total_steps: self.steps,
            warmup_fraction: match self.schedule {
                ScheduleKind::Constant => 0.0,
                ScheduleKind::CosineWarmup => self.warmup_fraction,
            },
            base_lr,
        }
    }

    pub fn matrix_schedule(&self) -> Schedule {
        self.schedule_for(self.lr_matrix)
    }

    pub fn adamw_schedule(&self) -> Schedule {
        self.schedule_for(self.lr_adamw)
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            sigma: self.sigma,
            batch: self.batch,
            seed: derive_seed(self.seed, NOISE),
        }
    }

    pub fn data_seed(&self) -> u64 {
        derive_seed(self.seed, DATA)
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, INIT)
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer_config().validate()?;
        self.matrix_schedule().validate()?;
        self.noise().validate()?;
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be positive".into()));
        }
        if !(self.dominance_cap > 0.0) {
            return Err(Error::Config("dominance_cap must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let s = c.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&s).unwrap(), c);
    }

    #[test]
    fn partial_file_overrides_defaults() {
        let c = RunConfig::from_toml_str(
            "problem = \"mlp\"\nwidths = [4, 8, 2]\noptimizer = \"muon\"\nsteps = 7\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(c.problem, ProblemKind::Mlp);
        assert_eq!(c.optimizer, OptimizerKind::Muon);
        assert_eq!(c.steps, 7);
        assert_eq!(c.lr_matrix, 0.02);
        assert_eq!(
            c.problem_spec(),
            ProblemSpec::Mlp {
                widths: vec![4, 8, 2],
                samples: 64
            }
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("lr = 0.1\n").is_err());
        assert!(RunConfig::from_toml_str("optimizer = \"lion\"\n").is_err());
    }

    #[test]
    fn seeds_are_separated_by_purpose() {
        let c = RunConfig::default();
        assert_ne!(c.data_seed(), c.init_seed());
        assert_ne!(c.init_seed(), c.noise().seed);
    }

    #[test]
    fn constant_schedule_ignores_warmup() {
        let c = RunConfig {
            schedule: ScheduleKind::Constant,
            ..RunConfig::default()
        };
        assert_eq!(c.matrix_schedule().warmup_steps(), 0);
        assert_eq!(c.matrix_schedule().lr(c.steps).unwrap(), c.lr_matrix);
    }
}
