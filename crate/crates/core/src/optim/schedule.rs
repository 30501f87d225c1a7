use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    #[default]
    CosineWarmup,
}

/// Learning-rate schedule over `0..=total_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub total_steps: u64,
    pub warmup_fraction: f64,
    pub base_lr: f64,
}

impl Schedule {
    pub fn constant(base_lr: f64, total_steps: u64) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            total_steps,
            warmup_fraction: 0.0,
            base_lr,
        }
    }

    /// Cosine decay to zero after a linear warmup over `ceil(0.1·T)` steps.
    pub fn cosine_warmup(base_lr: f64, total_steps: u64) -> Self {
        Self {
            kind: ScheduleKind::CosineWarmup,
            total_steps,
            warmup_fraction: 0.1,
            base_lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!(
                "warmup_fraction {} outside [0, 1)",
                self.warmup_fraction
            )));
        }
        if !(self.base_lr.is_finite() && self.base_lr >= 0.0) {
            return Err(Error::Config(format!("base_lr {} must be >= 0", self.base_lr)));
        }
        Ok(())
    }

    pub fn warmup_steps(&self) -> u64 {
        match self.kind {
            ScheduleKind::Constant => 0,
            ScheduleKind::CosineWarmup => {
                (self.warmup_fraction * self.total_steps as f64).ceil() as u64
            }
        }
    }

    pub fn lr(&self, t: u64) -> Result<f64> {
        if t > self.total_steps {
            return Err(Error::ScheduleRange {
                step: t,
                total: self.total_steps,
            });
        }
        Ok(match self.kind {
            ScheduleKind::Constant => self.base_lr,
            ScheduleKind::CosineWarmup => {
                let warmup = self.warmup_steps();
                if t < warmup {
                    self.base_lr * t as f64 / warmup as f64
                } else if self.total_steps == warmup {
                    self.base_lr
                } else {
                    let progress = (t - warmup) as f64 / (self.total_steps - warmup) as f64;
                    self.base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
                }
            }
        })
    }
}

/// Convenience wrapper matching the free-function form.
pub fn schedule_lr(s: &Schedule, t: u64) -> Result<f64> {
    s.lr(t)
}
