//! Independent reference computations shared by the oracle tests and the
//! acceptance gate.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trainguard::governor::{Governor, GuardConfig};
use trainguard::optimizer::{
    adamw_step, guarded_step, schedule_lr, ClipConfig, OptimizerConfig, OptimizerState, ScheduleConfig, ScheduleKind,
};
use trainguard::rng::{streams, RngState};
use trainguard::trainkit::{make_task, Batch, Task, TaskKind, TaskSpec};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-5;
pub const FD_POINTS: usize = 20;

/// Textbook AdamW, one parameter at a time.
pub struct ReferenceAdamW {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: i32,
}

impl ReferenceAdamW {
    /// Returns the parameter change for one step.
    #[allow(clippy::too_many_arguments)]
    pub fn step(&mut self, theta: &[f64], g: &[f64], lr: f64, b1: f64, b2: f64, eps: f64, wd: f64) -> Vec<f64> {
        self.t += 1;
        let mut change = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = self.m[i] / (1.0 - b1.powf(self.t as f64));
            let v_hat = self.v[i] / (1.0 - b2.powf(self.t as f64));
            change[i] = -lr * (m_hat / (v_hat.sqrt() + eps) + wd * theta[i]);
        }
        change
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Largest relative errors seen against the reference.
#[derive(Debug, Default, Clone, Copy)]
pub struct AdamwErrors {
    pub param: f64,
    pub delta: f64,
    pub moments: f64,
    pub step_count_mismatches: u32,
}

/// Runs `trials` × `steps` random AdamW steps. Each step starts the
/// reference from the same (θ, m, v, t) as the implementation, so errors
/// cannot compound.
pub fn adamw_vs_reference(seed: u64, trials: usize, steps: usize) -> AdamwErrors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = AdamwErrors::default();
    for _ in 0..trials {
        let n = 17;
        let cfg = OptimizerConfig {
            lr: 1e-3,
            betas: (rng.random_range(0.5..0.99), rng.random_range(0.9..0.9999)),
            eps: 1e-8,
            weight_decay: rng.random_range(0.0..0.1),
        };
        let mut theta: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut state = OptimizerState::new(n);
        for _ in 0..steps {
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lr = rng.random_range(1e-4..1e-1);
            let mut reference = ReferenceAdamW {
                m: state.m.clone(),
                v: state.v.clone(),
                t: state.t as i32,
            };
            let expected = reference.step(&theta, &g, lr, cfg.betas.0, cfg.betas.1, cfg.eps, cfg.weight_decay);
            let (delta, next) = adamw_step(&state, &theta, &g, lr, &cfg).unwrap();
            for i in 0..n {
                worst.param = worst.param.max(rel_err(theta[i] + delta[i], theta[i] + expected[i]));
                worst.delta = worst.delta.max(rel_err(delta[i], expected[i]));
                worst.moments = worst
                    .moments
                    .max(rel_err(next.m[i], reference.m[i]))
                    .max(rel_err(next.v[i], reference.v[i]));
            }
            if next.t as i32 != reference.t {
                worst.step_count_mismatches += 1;
            }
            state = next;
            for (p, d) in theta.iter_mut().zip(&delta) {
                *p += d;
            }
        }
    }
    worst
}

/// First step from θ = 1, g = 1, lr = 0.1: m̂ = g and v̂ = g², so
/// θ₁ = 1 − 0.1·1/(1 + eps). Returns the absolute error against that.
pub fn first_step_error() -> f64 {
    let cfg = OptimizerConfig {
        lr: 0.1,
        betas: (0.9, 0.999),
        eps: 1e-8,
        weight_decay: 0.0,
    };
    let (delta, _) = adamw_step(&OptimizerState::new(1), &[1.0], &[1.0], 0.1, &cfg).unwrap();
    (1.0 + delta[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs()
}

pub fn small_specs() -> Vec<TaskSpec> {
    vec![
        TaskSpec::Quadratic {
            dim: 12,
            condition: 1e4,
            noise: 0.1,
            eval_size: 64,
        },
        TaskSpec::MlpRegression {
            input_dim: 5,
            hidden: 7,
            noise: 0.1,
            eval_size: 64,
        },
        TaskSpec::BigramLm {
            alphabet: 6,
            corpus_len: 500,
            peakedness: 2.0,
            eval_size: 64,
        },
    ]
}

pub fn finite_difference(task: &Task, params: &[f64], batch: &Batch) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + FD_STEP;
            let up = task.loss(&p, batch).unwrap();
            p[i] = orig - FD_STEP;
            let down = task.loss(&p, batch).unwrap();
            p[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-12)
}

/// Worst analytic-vs-central-difference error over `points` random
/// parameter vectors per task kind.
pub fn gradient_errors(points: usize) -> Vec<(TaskKind, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    small_specs()
        .into_iter()
        .map(|spec| {
            let task = make_task(&spec, 5).unwrap();
            let mut worst: f64 = 0.0;
            for point in 0..points {
                let params: Vec<f64> = task
                    .init_params()
                    .iter()
                    .map(|p| p + 0.5 * (rng.random::<f64>() - 0.5))
                    .collect();
                let state = RngState {
                    counter: point as u64,
                    ..RngState::new(5, streams::TRAIN)
                };
                let (batch, _) = task.sample_batch(state, 8);
                let (_, analytic) = task.forward_backward(&params, &batch).unwrap();
                let numeric = finite_difference(&task, &params, &batch);
                worst = worst.max(relative_error(&analytic, &numeric));
            }
            (task.kind(), worst)
        })
        .collect()
}

pub fn default_specs() -> Vec<TaskSpec> {
    [TaskKind::Quadratic, TaskKind::MlpRegression, TaskKind::BigramLm]
        .into_iter()
        .map(TaskSpec::default_for)
        .collect()
}

/// Drives a disabled governor and a hand-written AdamW loop side by side.
/// Returns the first step at which parameters or optimizer state differ in
/// any bit, or `None` if the trajectories are identical.
pub fn off_switch_divergence(spec: &TaskSpec, steps: u64) -> Option<u64> {
    let task = make_task(spec, 42).unwrap();
    let cfg = OptimizerConfig {
        lr: 1e-2,
        ..Default::default()
    };
    let sched = ScheduleConfig {
        base_lr: cfg.lr,
        min_lr: 1e-3,
        total_steps: steps,
        kind: ScheduleKind::Cosine,
    };
    let layout = task.layout();
    let mut gov = Governor::new(GuardConfig::disabled()).unwrap();
    let mut opt = OptimizerState::new(task.num_params());
    let mut plain_opt = opt.clone();
    let mut params = task.init_params();
    let mut plain = params.clone();
    let mut rng = RngState::new(42, streams::TRAIN);
    for step in 0..steps {
        let lr = schedule_lr(step, &sched);
        let (batch, next) = task.sample_batch(rng, 16);
        rng = next;

        let (loss, mut grads) = task.forward_backward(&params, &batch).unwrap();
        let rec = guarded_step(
            &mut gov,
            &mut opt,
            &cfg,
            &layout,
            &mut params,
            &mut grads,
            loss,
            step,
            lr,
            ClipConfig::DISABLED,
        )
        .unwrap();

        let (_, plain_grads) = task.forward_backward(&plain, &batch).unwrap();
        let (delta, next_opt) = adamw_step(&plain_opt, &plain, &plain_grads, lr, &cfg).unwrap();
        plain_opt = next_opt;
        for (p, d) in plain.iter_mut().zip(&delta) {
            *p += d;
        }
        let same = rec.scale == 1.0
            && !rec.active
            && opt == plain_opt
            && params.iter().zip(&plain).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Some(step);
        }
    }
    None
}
