use serde::{Deserialize, Serialize};

use super::analyzer::Regime;
use super::config::{GuardConfig, SPIKE_DAMPING, STRESS_DAMPING};
use crate::{Error, Result};

/// The bounded action applied to one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPosture {
    /// Always within `[c_min, c_max]`.
    pub scale: f64,
    /// Set only when the observation (loss or gradient) was non-finite.
    pub skip_step: bool,
    /// Regime that produced this posture.
    pub mode: Regime,
}

impl ControlPosture {
    pub fn identity(cfg: &GuardConfig) -> Self {
        Self {
            scale: cfg.c_max,
            skip_step: false,
            mode: Regime::Stable,
        }
    }
}

pub fn select_posture(
    regime: Regime,
    current: &ControlPosture,
    cfg: &GuardConfig,
    observation_finite: bool,
) -> ControlPosture {
    if !cfg.auto_enabled {
        return ControlPosture {
            scale: 1.0,
            skip_step: false,
            mode: regime,
        };
    }
    let scale = match regime {
        Regime::Spike => current.scale * SPIKE_DAMPING,
        Regime::Stress => current.scale * STRESS_DAMPING,
        Regime::Recovery | Regime::Stable => current.scale * (1.0 + cfg.recovery_fast),
    };
    ControlPosture {
        scale: scale.clamp(cfg.c_min, cfg.c_max),
        skip_step: !observation_finite,
        mode: regime,
    }
}

/// Scales an optimizer delta by the posture. A skipped step yields the zero
/// delta. Never amplifies and never changes direction.
pub fn apply_posture(delta: &[f64], posture: &ControlPosture) -> Result<Vec<f64>> {
    if posture.skip_step {
        return Ok(vec![0.0; delta.len()]);
    }
    if delta.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFiniteActuation);
    }
    Ok(delta.iter().map(|d| posture.scale * d).collect())
}
