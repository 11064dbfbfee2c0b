use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Global-norm clipping threshold; `None` disables clipping.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClipConfig {
    pub g: Option<f64>,
}

impl ClipConfig {
    pub const DISABLED: ClipConfig = ClipConfig { g: None };

    pub fn global_norm(g: f64) -> Self {
        Self { g: Some(g) }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        match self.g {
            Some(g) if !(g.is_finite() && g > 0.0) => Err(Error::config(key, format!("clip threshold must be > 0, got {g}"))),
            _ => Ok(()),
        }
    }
}

/// Euclidean norm, rescaled internally so that very large entries do not
/// overflow the sum of squares.
pub fn global_norm(values: &[f64]) -> f64 {
    let peak = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if peak == 0.0 || !peak.is_finite() {
        return peak;
    }
    let sum: f64 = values.iter().map(|v| (v / peak).powi(2)).sum();
    peak * sum.sqrt()
}

/// Rescales `grads` in place so that their norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> Result<f64> {
    if !(max_norm.is_finite() && max_norm > 0.0) {
        return Err(Error::config("clip", format!("clip threshold must be > 0, got {max_norm}")));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    let norm = global_norm(grads);
    if norm > max_norm {
        let factor = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= factor;
        }
    }
    Ok(norm)
}
