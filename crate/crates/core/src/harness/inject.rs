use serde::{Deserialize, Serialize};

use crate::trainkit::Batch;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionMode {
    /// Scale the batch targets (token loss weight for the bigram task).
    #[default]
    OutlierBatch,
    /// Scale the computed gradient.
    GradientBurst,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InjectionSchedule {
    Steps(Vec<u64>),
    /// Steps `start, start + period, start + 2·period, ...`
    Periodic { period: u64, start: u64 },
}

impl InjectionSchedule {
    pub fn contains(&self, step: u64) -> bool {
        match self {
            InjectionSchedule::Steps(steps) => steps.contains(&step),
            InjectionSchedule::Periodic { period, start } => step >= *start && (step - start).is_multiple_of(*period),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSpec {
    pub schedule: InjectionSchedule,
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    #[serde(default)]
    pub mode: InjectionMode,
}

fn default_magnitude() -> f64 {
    50.0
}

impl InjectionSpec {
    pub fn periodic(period: u64, magnitude: f64, mode: InjectionMode) -> Self {
        Self {
            schedule: InjectionSchedule::Periodic { period, start: period },
            magnitude,
            mode,
        }
    }

    pub fn validate(&self, key: &str, steps: u64) -> Result<()> {
        if !(self.magnitude.is_finite() && self.magnitude >= 1.0) {
            return Err(Error::config(
                format!("{key}.magnitude"),
                format!("must be >= 1, got {}", self.magnitude),
            ));
        }
        match &self.schedule {
            InjectionSchedule::Steps(s) => {
                if let Some(bad) = s.iter().find(|&&x| x >= steps) {
                    return Err(Error::config(
                        format!("{key}.schedule"),
                        format!("injection step {bad} outside [0, {steps})"),
                    ));
                }
            }
            InjectionSchedule::Periodic { period, start } => {
                if *period == 0 {
                    return Err(Error::config(format!("{key}.schedule.period"), "must be at least 1"));
                }
                if *start >= steps {
                    return Err(Error::config(
                        format!("{key}.schedule.start"),
                        format!("first injection {start} outside [0, {steps})"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Gradient multiplier for `step`, if this is a scheduled gradient burst.
    pub fn gradient_factor(&self, step: u64) -> Option<f64> {
        (self.mode == InjectionMode::GradientBurst && self.schedule.contains(step)).then_some(self.magnitude)
    }
}

/// On scheduled steps, flags the batch and (in `outlier_batch` mode) scales
/// its targets. Off-schedule batches pass through untouched.
pub fn inject_outliers(mut batch: Batch, spec: &InjectionSpec, step: u64) -> Batch {
    if spec.schedule.contains(step) {
        batch.outlier_flag = true;
        if spec.mode == InjectionMode::OutlierBatch {
            batch.scale_targets(spec.magnitude);
        }
    }
    batch
}
