use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::inject::{inject_outliers, InjectionSpec};
use crate::governor::{Governor, GuardConfig, TelemetryLog, TelemetrySummary};
use crate::optimizer::{guarded_step, ClipConfig, OptimizerConfig, OptimizerState, ScheduleConfig, ScheduleKind};
use crate::rng::{streams, RngState};
use crate::trainkit::{make_task, TaskSpec};
use crate::{Error, Result};

/// Which optimizer plane configuration a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Plain AdamW. The analyzer still runs in observe-only mode so the
    /// baseline gets comparable telemetry, but the posture is pinned to 1.
    Baseline,
    Guarded(GuardConfig),
}

impl Arm {
    pub fn guard_config(&self) -> GuardConfig {
        match self {
            Arm::Baseline => GuardConfig::disabled(),
            Arm::Guarded(cfg) => *cfg,
        }
    }

    pub fn is_baseline(&self) -> bool {
        matches!(self, Arm::Baseline)
    }

    /// Short label such as `adamw`, `adamw+clip0.5` or `guard+clip1.0`.
    pub fn label(&self, clip: ClipConfig) -> String {
        let base = match self {
            Arm::Baseline => "adamw",
            Arm::Guarded(_) => "guard",
        };
        match clip.g {
            Some(g) => format!("{base}+clip{g:?}"),
            None => base.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    /// `min_lr = min_lr_ratio · lr`.
    pub min_lr_ratio: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Cosine,
            min_lr_ratio: 0.1,
        }
    }
}

impl ScheduleSpec {
    pub fn resolve(&self, base_lr: f64, total_steps: u64) -> ScheduleConfig {
        ScheduleConfig {
            base_lr,
            min_lr: self.min_lr_ratio * base_lr,
            total_steps,
            kind: self.kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_lr_ratio.is_finite() && (0.0..=1.0).contains(&self.min_lr_ratio)) {
            return Err(Error::config(
                "schedule.min_lr_ratio",
                format!("must lie in [0, 1], got {}", self.min_lr_ratio),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: TaskSpec,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleSpec,
    pub arm: Arm,
    pub clip: ClipConfig,
    pub steps: u64,
    pub batch_size: usize,
    pub eval_every: u64,
    pub seed: u64,
    pub injection: Option<InjectionSpec>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.task.validate("task")?;
        self.optimizer.validate()?;
        self.schedule.validate()?;
        self.arm.guard_config().validate()?;
        self.clip.validate("clip")?;
        if self.steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.eval_every == 0 || self.eval_every > self.steps {
            return Err(Error::config(
                "eval_every",
                format!("must lie in [1, steps={}], got {}", self.steps, self.eval_every),
            ));
        }
        if let Some(inj) = &self.injection {
            inj.validate("injection", self.steps)?;
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        self.arm.label(self.clip)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    #[serde(with = "crate::report::float_token")]
    pub eval_loss: f64,
    #[serde(with = "crate::report::float_token")]
    pub perplexity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub arm: String,
    pub seed: u64,
    pub lr: f64,
    pub steps: u64,
    #[serde(with = "crate::report::float_token")]
    pub initial_loss: f64,
    #[serde(with = "crate::report::float_token")]
    pub final_loss: f64,
    #[serde(with = "crate::report::float_token")]
    pub final_perplexity: f64,
    pub wall_seconds: f64,
    pub steps_per_second: f64,
    /// Step at which a baseline run produced a non-finite gradient and was
    /// stopped with poisoned parameters.
    pub diverged_at: Option<u64>,
    pub summary: TelemetrySummary,
    pub trace: Vec<EvalPoint>,
    #[serde(skip)]
    pub log: TelemetryLog,
}

/// Executes one training run: sample → inject → forward/backward → guarded
/// AdamW step, evaluating every `eval_every` steps. Deterministic in
/// `(cfg, seed)` apart from the wall-clock fields.
pub fn run_training(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();

    let task = make_task(&cfg.task, cfg.seed)?;
    let layout = task.layout();
    let schedule = cfg.schedule.resolve(cfg.optimizer.lr, cfg.steps);
    let mut governor = Governor::new(cfg.arm.guard_config())?;
    let mut opt = OptimizerState::new(task.num_params());
    let mut params = task.init_params();
    let mut grads = vec![0.0; task.num_params()];
    let mut rng = RngState::new(cfg.seed, streams::TRAIN);

    let initial = task.evaluate(&params)?;
    let mut trace = vec![EvalPoint {
        step: 0,
        eval_loss: initial.eval_loss,
        perplexity: initial.perplexity,
    }];
    let mut diverged_at = None;

    for step in 0..cfg.steps {
        let lr_t = crate::optimizer::schedule_lr(step, &schedule);
        let (mut batch, next) = task.sample_batch(rng, cfg.batch_size);
        rng = next;
        if let Some(inj) = &cfg.injection {
            batch = inject_outliers(batch, inj, step);
        }
        let loss = task.forward_backward_into(&params, &batch, &mut grads)?;
        if let Some(factor) = cfg.injection.as_ref().and_then(|inj| inj.gradient_factor(step)) {
            grads.iter_mut().for_each(|g| *g *= factor);
        }

        match guarded_step(
            &mut governor,
            &mut opt,
            &cfg.optimizer,
            &layout,
            &mut params,
            &mut grads,
            loss,
            step,
            lr_t,
            cfg.clip,
        ) {
            Ok(_) => {}
            Err(Error::NonFiniteGradient) if cfg.arm.is_baseline() => {
                // Plain AdamW would fold the NaN into its moments and weights.
                params.fill(f64::NAN);
                diverged_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        }

        let done = step + 1;
        if done % cfg.eval_every == 0 && done != cfg.steps {
            let e = task.evaluate(&params)?;
            trace.push(EvalPoint {
                step: done,
                eval_loss: e.eval_loss,
                perplexity: e.perplexity,
            });
        }
    }

    let last = task.evaluate(&params)?;
    trace.push(EvalPoint {
        step: cfg.steps,
        eval_loss: last.eval_loss,
        perplexity: last.perplexity,
    });

    let wall_seconds = started.elapsed().as_secs_f64();
    let log = governor.into_log();
    Ok(RunResult {
        arm: cfg.label(),
        seed: cfg.seed,
        lr: cfg.optimizer.lr,
        steps: cfg.steps,
        initial_loss: initial.eval_loss,
        final_loss: last.eval_loss,
        final_perplexity: last.perplexity,
        wall_seconds,
        steps_per_second: log.len() as f64 / wall_seconds.max(f64::MIN_POSITIVE),
        diverged_at,
        summary: log.finalize(),
        trace,
        log,
    })
}
