//! Optimizer plane: AdamW, global-norm clipping, learning-rate schedule and
//! the guarded step that composes them with the governor.

mod adamw;
mod clip;
mod guarded;
mod schedule;

pub use adamw::{adamw_step, adamw_step_in_place, OptimizerConfig, OptimizerState};
pub use clip::{clip_global_norm, global_norm, ClipConfig};
pub use guarded::{guarded_step, ParamLayout};
pub use schedule::{schedule_lr, ScheduleConfig, ScheduleKind};
