use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Multiplicative damping applied on a Spike classification.
pub const SPIKE_DAMPING: f64 = 0.5;
/// Multiplicative damping applied on a Stress classification.
pub const STRESS_DAMPING: f64 = 0.9;
/// A step counts as control-active when `scale < 1 - ACTIVE_TOLERANCE`.
pub const ACTIVE_TOLERANCE: f64 = 1e-9;
/// Denominator floor for loss and gradient ratios.
pub const RATIO_FLOOR: f64 = 1e-12;

/// Public controller parameters.
///
/// Field names follow the optimizer-construction keywords one-for-one so a
/// configuration written for one front end is portable to another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardConfig {
    pub auto_enabled: bool,
    /// Steps between gradient probes.
    pub stats_freq: u64,
    /// Loss (or gradient-RMS) ratio over its EMA that flags Stress.
    pub stress_threshold: f64,
    /// Loss ratio over its EMA that flags Spike.
    pub spike_threshold: f64,
    /// Per-step multiplicative release rate back toward `c_max`.
    pub recovery_fast: f64,
    pub ema_decay: f64,
    /// Reduce per-group gradient RMS with max (true) or mean (false).
    pub use_max_rms: bool,
    pub c_min: f64,
    pub c_max: f64,
    /// Consecutive non-worsening observations needed to enter Recovery.
    pub recovery_confirm: u32,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            auto_enabled: true,
            stats_freq: 10,
            stress_threshold: 1.25,
            spike_threshold: 1.8,
            recovery_fast: 0.01,
            ema_decay: 0.95,
            use_max_rms: true,
            c_min: 0.05,
            c_max: 1.0,
            recovery_confirm: 3,
        }
    }
}

impl GuardConfig {
    /// Observe-only configuration: the analyzer still runs and logs, but the
    /// posture is pinned to identity.
    pub fn disabled() -> Self {
        Self {
            auto_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("guard.{key}"), reason))
            }
        };
        check(self.stats_freq >= 1, "stats_freq", "must be at least 1".into())?;
        check(
            self.stress_threshold.is_finite() && self.stress_threshold > 1.0,
            "stress_threshold",
            format!("must be > 1, got {}", self.stress_threshold),
        )?;
        check(
            self.spike_threshold.is_finite() && self.spike_threshold > self.stress_threshold,
            "spike_threshold",
            format!(
                "must exceed stress_threshold ({}), got {}",
                self.stress_threshold, self.spike_threshold
            ),
        )?;
        check(
            self.recovery_fast.is_finite() && self.recovery_fast >= 0.0,
            "recovery_fast",
            format!("must be >= 0, got {}", self.recovery_fast),
        )?;
        check(
            self.ema_decay > 0.0 && self.ema_decay < 1.0,
            "ema_decay",
            format!("must lie in (0, 1), got {}", self.ema_decay),
        )?;
        check(
            self.c_max == 1.0,
            "c_max",
            format!("upper scale bound is fixed at 1.0, got {}", self.c_max),
        )?;
        check(
            self.c_min > 0.0 && self.c_min <= self.c_max,
            "c_min",
            format!("must lie in (0, c_max], got {}", self.c_min),
        )?;
        check(self.recovery_confirm >= 1, "recovery_confirm", "must be at least 1".into())?;
        Ok(())
    }
}
