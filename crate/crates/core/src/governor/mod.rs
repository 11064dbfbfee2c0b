//! Governance plane: sensor, analyzer, policy, actuator and logger.
//!
//! Each role is a plain function over explicit state so that the whole loop
//! is deterministic and trivially testable. [`Governor`] bundles the state of
//! one run for callers that just want to feed it steps.

mod analyzer;
mod config;
mod policy;
mod telemetry;

pub use analyzer::{classify_regime, gradient_rms, sense, update_ema, AnalyzerState, Regime, TelemetrySample};
pub use config::{GuardConfig, ACTIVE_TOLERANCE, RATIO_FLOOR, SPIKE_DAMPING, STRESS_DAMPING};
pub use policy::{apply_posture, select_posture, ControlPosture};
pub use telemetry::{finalize_log, StepRecord, TelemetryLog, TelemetrySummary};

use crate::Result;

/// Per-run governance state: analyzer estimate, current posture and the log.
#[derive(Debug, Clone)]
pub struct Governor {
    cfg: GuardConfig,
    analyzer: AnalyzerState,
    posture: ControlPosture,
    log: TelemetryLog,
}

impl Governor {
    pub fn new(cfg: GuardConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            posture: ControlPosture::identity(&cfg),
            cfg,
            analyzer: AnalyzerState::default(),
            log: TelemetryLog::default(),
        })
    }

    pub fn config(&self) -> &GuardConfig {
        &self.cfg
    }

    pub fn analyzer(&self) -> &AnalyzerState {
        &self.analyzer
    }

    pub fn posture(&self) -> &ControlPosture {
        &self.posture
    }

    pub fn log(&self) -> &TelemetryLog {
        &self.log
    }

    pub fn into_log(self) -> TelemetryLog {
        self.log
    }

    /// Runs sense → classify → posture for one step and stores the new state.
    ///
    /// `grad_groups` are read only. The returned posture is what the actuator
    /// must apply to this step's update.
    pub fn observe(
        &mut self,
        step: u64,
        loss: f64,
        grad_groups: Option<&[&[f64]]>,
        lr: f64,
    ) -> (TelemetrySample, ControlPosture) {
        let sample = sense(step, loss, grad_groups, lr, &self.cfg);
        let (regime, analyzer) = classify_regime(&sample, &self.analyzer, self.posture.scale, &self.cfg);
        let finite = sample.loss.is_finite() && sample.grad_finite;
        self.posture = select_posture(regime, &self.posture, &self.cfg, finite);
        self.analyzer = analyzer;
        (sample, self.posture)
    }

    /// Builds the record for the step just observed and appends it to the log.
    pub fn record(&mut self, sample: &TelemetrySample) -> Result<StepRecord> {
        let rec = StepRecord::new(sample, &self.analyzer, &self.posture);
        self.log.log_step(rec.clone())?;
        Ok(rec)
    }
}
