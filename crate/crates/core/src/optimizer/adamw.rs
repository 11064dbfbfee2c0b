//! AdamW with bias correction and decoupled weight decay.
//!
//! ```text
//! m  = β₁·m + (1-β₁)·g
//! v  = β₂·v + (1-β₂)·g²
//! m̂  = m / (1-β₁ᵗ),  v̂ = v / (1-β₂ᵗ)
//! Δθ = -lr · ( m̂ / (√v̂ + ε) + λ·θ )
//! ```
//!
//! The delta is returned rather than applied; the actuator decides how much
//! of it reaches the parameters.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            betas: (0.9, 0.999),
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("optimizer.lr", format!("must be > 0, got {}", self.lr)));
        }
        let (b1, b2) = self.betas;
        if !(b1 > 0.0 && b1 < 1.0 && b2 > 0.0 && b2 < 1.0) {
            return Err(Error::config(
                "optimizer.betas",
                format!("both betas must lie in (0, 1), got ({b1}, {b2})"),
            ));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::config("optimizer.eps", format!("must be > 0, got {}", self.eps)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config(
                "optimizer.weight_decay",
                format!("must be >= 0, got {}", self.weight_decay),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Advances the moments in place and writes the update into `delta`.
///
/// On error nothing is modified.
pub fn adamw_step_in_place(
    state: &mut OptimizerState,
    params: &[f64],
    grads: &[f64],
    lr_t: f64,
    cfg: &OptimizerConfig,
    delta: &mut [f64],
) -> Result<()> {
    let n = state.len();
    for len in [state.v.len(), params.len(), grads.len(), delta.len()] {
        if len != n {
            return Err(Error::ShapeMismatch { expected: n, got: len });
        }
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }

    let (b1, b2) = cfg.betas;
    state.t += 1;
    // powf rather than powi: repeated multiplication drifts by a few ulps
    // per step over long runs.
    let t = state.t as f64;
    let bc1 = 1.0 - b1.powf(t);
    let bc2 = 1.0 - b2.powf(t);

    for i in 0..n {
        let g = grads[i];
        let m = b1 * state.m[i] + (1.0 - b1) * g;
        let v = b2 * state.v[i] + (1.0 - b2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        delta[i] = -lr_t * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * params[i]);
    }
    Ok(())
}

/// Pure form: returns the delta and the advanced state.
pub fn adamw_step(
    state: &OptimizerState,
    params: &[f64],
    grads: &[f64],
    lr_t: f64,
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, OptimizerState)> {
    let mut next = state.clone();
    let mut delta = vec![0.0; params.len()];
    adamw_step_in_place(&mut next, params, grads, lr_t, cfg, &mut delta)?;
    Ok((delta, next))
}
