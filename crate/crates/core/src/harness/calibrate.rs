use serde::{Deserialize, Serialize};

use super::exec::execute;
use super::run::{run_training, Arm, RunConfig};
use super::{is_severely_degraded, is_trainable};
use crate::optimizer::ClipConfig;
use crate::{Error, Result};

/// Doubling search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationProbe {
    pub floor: f64,
    pub max_doublings: u32,
    /// Length of each probe run.
    pub steps: u64,
}

impl Default for CalibrationProbe {
    fn default() -> Self {
        Self {
            floor: 1e-3,
            max_doublings: 20,
            steps: 1000,
        }
    }
}

impl CalibrationProbe {
    pub fn validate(&self, key: &str) -> Result<()> {
        if !(self.floor.is_finite() && self.floor > 0.0) {
            return Err(Error::config(format!("{key}.floor"), format!("must be > 0, got {}", self.floor)));
        }
        if self.steps == 0 {
            return Err(Error::config(format!("{key}.steps"), "must be at least 1"));
        }
        Ok(())
    }

    pub fn lr_at(&self, doubling: u32) -> f64 {
        self.floor * 2f64.powi(doubling as i32)
    }
}

/// Per-task learning rates derived from the doubling search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedRates {
    /// Degrades plain AdamW in every calibration seed.
    pub aggressive: f64,
    /// Largest rate on the doubling grid below every per-seed degrading
    /// rate at which plain AdamW is trainable in every seed.
    pub moderate: f64,
    /// A quarter of `moderate`.
    pub safe: f64,
    /// `(seed, first degrading lr)` for each calibration seed.
    pub per_seed: Vec<(u64, f64)>,
}

/// Plain-AdamW probe of `template` at `lr` for `probe.steps` steps, with
/// clipping and injection removed.
fn probe_config(template: &RunConfig, probe: &CalibrationProbe, lr: f64, seed: u64) -> RunConfig {
    let mut cfg = template.clone();
    cfg.arm = Arm::Baseline;
    cfg.clip = ClipConfig::DISABLED;
    cfg.injection = None;
    cfg.steps = probe.steps;
    cfg.eval_every = probe.steps;
    cfg.optimizer.lr = lr;
    cfg.seed = seed;
    cfg
}

fn degrades(template: &RunConfig, probe: &CalibrationProbe, lr: f64, seed: u64) -> Result<bool> {
    let res = run_training(&probe_config(template, probe, lr, seed))?;
    Ok(is_severely_degraded(res.initial_loss, res.final_loss))
}

fn trains(template: &RunConfig, probe: &CalibrationProbe, lr: f64, seed: u64) -> Result<bool> {
    let res = run_training(&probe_config(template, probe, lr, seed))?;
    Ok(is_trainable(res.initial_loss, res.final_loss))
}

/// Runs `check` for every seed and reports whether it held in all of them.
fn holds_for_all(seeds: &[u64], check: impl Fn(u64) -> Result<bool> + Sync + Send) -> Result<bool> {
    let all = execute(seeds, |&seed| check(seed)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(all.into_iter().all(|ok| ok))
}

/// Doubles the learning rate from `probe.floor` until a plain AdamW run of
/// `template` degrades; returns the first degrading rate.
pub fn calibrate_divergence_lr(template: &RunConfig, probe: &CalibrationProbe) -> Result<f64> {
    probe.validate("calibration")?;
    for i in 0..=probe.max_doublings {
        let lr = probe.lr_at(i);
        if degrades(template, probe, lr, template.seed)? {
            return Ok(lr);
        }
    }
    Err(Error::NotStressable {
        floor: probe.floor,
        doublings: probe.max_doublings,
    })
}

/// Runs the doubling search for every seed and derives the
/// aggressive / moderate / safe rates.
pub fn calibrate_rates(template: &RunConfig, probe: &CalibrationProbe, seeds: &[u64]) -> Result<CalibratedRates> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "must not be empty"));
    }
    let found = execute(seeds, |&seed| {
        let mut t = template.clone();
        t.seed = seed;
        calibrate_divergence_lr(&t, probe).map(|lr| (seed, lr))
    });
    let per_seed = found.into_iter().collect::<Result<Vec<_>>>()?;

    let smallest = per_seed.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut moderate = smallest / 2.0;
    loop {
        if moderate < probe.floor {
            return Err(Error::NoTrainableRate { floor: probe.floor });
        }
        if holds_for_all(seeds, |seed| trains(template, probe, moderate, seed))? {
            break;
        }
        moderate /= 2.0;
    }

    // Degradation need not be monotone in lr, so confirm the largest
    // per-seed rate degrades everywhere, doubling further if needed.
    let mut aggressive = per_seed.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut doubled = 0;
    while !holds_for_all(seeds, |seed| degrades(template, probe, aggressive, seed))? {
        doubled += 1;
        if doubled > probe.max_doublings {
            return Err(Error::NotStressable {
                floor: probe.floor,
                doublings: probe.max_doublings,
            });
        }
        aggressive *= 2.0;
    }

    Ok(CalibratedRates {
        aggressive,
        moderate,
        safe: moderate / 4.0,
        per_seed,
    })
}
