use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Cosine,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub base_lr: f64,
    pub min_lr: f64,
    pub total_steps: u64,
    pub kind: ScheduleKind,
}

/// Learning rate at `step`. Steps past `total_steps` clamp to `min_lr`.
pub fn schedule_lr(step: u64, cfg: &ScheduleConfig) -> f64 {
    match cfg.kind {
        ScheduleKind::Constant => cfg.base_lr,
        ScheduleKind::Cosine => {
            if step == 0 {
                cfg.base_lr
            } else if step >= cfg.total_steps {
                cfg.min_lr
            } else {
                let progress = step as f64 / cfg.total_steps as f64;
                cfg.min_lr + 0.5 * (cfg.base_lr - cfg.min_lr) * (1.0 + (PI * progress).cos())
            }
        }
    }
}
