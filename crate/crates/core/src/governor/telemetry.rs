use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::analyzer::{AnalyzerState, Regime, TelemetrySample};
use super::config::ACTIVE_TOLERANCE;
use super::policy::ControlPosture;
use crate::{Error, Result};

/// One line of the per-run JSONL telemetry. Field order is the wire order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: u64,
    #[serde(with = "crate::report::float_token")]
    pub loss: f64,
    pub loss_ema: f64,
    pub regime: Regime,
    pub scale: f64,
    pub active: bool,
    pub skipped: bool,
    pub grad_rms: Option<f64>,
    pub lr: f64,
}

impl StepRecord {
    pub fn new(sample: &TelemetrySample, analyzer: &AnalyzerState, posture: &ControlPosture) -> Self {
        Self {
            step: sample.step,
            loss: sample.loss,
            loss_ema: analyzer.loss_ema,
            regime: analyzer.regime,
            scale: posture.scale,
            active: is_active(posture.scale, posture.skip_step),
            skipped: posture.skip_step,
            grad_rms: sample.grad_rms,
            lr: sample.lr,
        }
    }
}

pub(crate) fn is_active(scale: f64, skipped: bool) -> bool {
    skipped || scale < 1.0 - ACTIVE_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySummary {
    pub total_steps: u64,
    pub control_active_steps: u64,
    pub regime_switches: u64,
    pub control_energy: f64,
    pub min_scale: f64,
    pub skipped_steps: u64,
}

/// Ordered, append-only sink of step records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TelemetryLog {
    records: Vec<StepRecord>,
}

impl TelemetryLog {
    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn log_step(&mut self, rec: StepRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if rec.step <= last.step {
                return Err(Error::OutOfOrderStep {
                    last: last.step,
                    got: rec.step,
                });
            }
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn finalize(&self) -> TelemetrySummary {
        let mut summary = TelemetrySummary {
            total_steps: self.records.len() as u64,
            control_active_steps: 0,
            regime_switches: 0,
            control_energy: 0.0,
            min_scale: 1.0,
            skipped_steps: 0,
        };
        for rec in &self.records {
            if rec.active {
                summary.control_active_steps += 1;
            }
            if rec.skipped {
                summary.skipped_steps += 1;
                summary.control_energy += 1.0;
            } else {
                summary.control_energy += (1.0 - rec.scale).powi(2);
            }
            summary.min_scale = summary.min_scale.min(rec.scale);
        }
        summary.regime_switches = self
            .records
            .windows(2)
            .filter(|w| w[0].regime != w[1].regime)
            .count() as u64;
        summary
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut log = Self::default();
        for line in input.lines() {
            let line = line.map_err(|e| Error::io("<jsonl>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            log.log_step(serde_json::from_str(&line)?)?;
        }
        Ok(log)
    }
}

pub fn finalize_log(log: &TelemetryLog) -> TelemetrySummary {
    log.finalize()
}
