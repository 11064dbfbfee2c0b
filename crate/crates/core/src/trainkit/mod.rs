//! Desk-scale differentiable tasks with exact gradients.
//!
//! Three task kinds stand in for a language-model training run:
//! an ill-conditioned least-squares bowl, a one-hidden-layer tanh regression
//! against a random teacher, and a bigram next-token model over a synthetic
//! Markov corpus. Every task is fully determined by its spec and seed.

mod batch;
mod bigram;
mod mlp;
mod quadratic;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use batch::{Batch, BatchData};
pub use bigram::Bigram;
pub use mlp::Mlp;
pub use quadratic::Quadratic;

use crate::optimizer::ParamLayout;
use crate::rng::{streams, RngState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Quadratic,
    MlpRegression,
    BigramLm,
}

/// Task kind plus its dimensions. Serialized with a `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Quadratic {
        #[serde(default = "defaults::quad_dim")]
        dim: usize,
        /// Ratio of largest to smallest Hessian eigenvalue.
        #[serde(default = "defaults::condition")]
        condition: f64,
        #[serde(default = "defaults::quad_noise")]
        noise: f64,
        #[serde(default = "defaults::eval_size")]
        eval_size: usize,
    },
    MlpRegression {
        #[serde(default = "defaults::input_dim")]
        input_dim: usize,
        #[serde(default = "defaults::hidden")]
        hidden: usize,
        #[serde(default = "defaults::mlp_noise")]
        noise: f64,
        #[serde(default = "defaults::eval_size")]
        eval_size: usize,
    },
    BigramLm {
        #[serde(default = "defaults::alphabet")]
        alphabet: usize,
        #[serde(default = "defaults::corpus_len")]
        corpus_len: usize,
        /// Standard deviation of the teacher's transition logits.
        #[serde(default = "defaults::peakedness")]
        peakedness: f64,
        #[serde(default = "defaults::eval_size")]
        eval_size: usize,
    },
}

pub(crate) mod defaults {
    pub fn quad_dim() -> usize {
        32
    }
    pub fn condition() -> f64 {
        1e4
    }
    pub fn quad_noise() -> f64 {
        0.1
    }
    pub fn input_dim() -> usize {
        8
    }
    pub fn hidden() -> usize {
        16
    }
    pub fn mlp_noise() -> f64 {
        0.1
    }
    pub fn alphabet() -> usize {
        16
    }
    pub fn corpus_len() -> usize {
        20_000
    }
    pub fn peakedness() -> f64 {
        2.0
    }
    pub fn eval_size() -> usize {
        1024
    }
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::Quadratic { .. } => TaskKind::Quadratic,
            TaskSpec::MlpRegression { .. } => TaskKind::MlpRegression,
            TaskSpec::BigramLm { .. } => TaskKind::BigramLm,
        }
    }

    pub fn default_for(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Quadratic => TaskSpec::Quadratic {
                dim: defaults::quad_dim(),
                condition: defaults::condition(),
                noise: defaults::quad_noise(),
                eval_size: defaults::eval_size(),
            },
            TaskKind::MlpRegression => TaskSpec::MlpRegression {
                input_dim: defaults::input_dim(),
                hidden: defaults::hidden(),
                noise: defaults::mlp_noise(),
                eval_size: defaults::eval_size(),
            },
            TaskKind::BigramLm => TaskSpec::BigramLm {
                alphabet: defaults::alphabet(),
                corpus_len: defaults::corpus_len(),
                peakedness: defaults::peakedness(),
                eval_size: defaults::eval_size(),
            },
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        let fail = |field: &str, reason: String| Err(Error::config(format!("{key}.{field}"), reason));
        match *self {
            TaskSpec::Quadratic {
                dim,
                condition,
                noise,
                eval_size,
            } => {
                if dim == 0 {
                    return fail("dim", "must be at least 1".into());
                }
                if !(condition.is_finite() && condition >= 1.0) {
                    return fail("condition", format!("must be >= 1, got {condition}"));
                }
                if !(noise.is_finite() && noise >= 0.0) {
                    return fail("noise", format!("must be >= 0, got {noise}"));
                }
                if eval_size == 0 {
                    return fail("eval_size", "must be at least 1".into());
                }
            }
            TaskSpec::MlpRegression {
                input_dim,
                hidden,
                noise,
                eval_size,
            } => {
                if input_dim == 0 {
                    return fail("input_dim", "must be at least 1".into());
                }
                if hidden == 0 {
                    return fail("hidden", "must be at least 1".into());
                }
                if !(noise.is_finite() && noise >= 0.0) {
                    return fail("noise", format!("must be >= 0, got {noise}"));
                }
                if eval_size == 0 {
                    return fail("eval_size", "must be at least 1".into());
                }
            }
            TaskSpec::BigramLm {
                alphabet,
                corpus_len,
                peakedness,
                eval_size,
            } => {
                if alphabet < 2 {
                    return fail("alphabet", format!("must be at least 2, got {alphabet}"));
                }
                if corpus_len < 2 {
                    return fail("corpus_len", format!("must be at least 2, got {corpus_len}"));
                }
                if !(peakedness.is_finite() && peakedness >= 0.0) {
                    return fail("peakedness", format!("must be >= 0, got {peakedness}"));
                }
                if eval_size == 0 {
                    return fail("eval_size", "must be at least 1".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub eval_loss: f64,
    pub perplexity: f64,
}

impl EvalResult {
    pub fn from_loss(eval_loss: f64) -> Self {
        Self {
            eval_loss,
            perplexity: eval_loss.exp(),
        }
    }
}

#[derive(Debug, Clone)]
enum Model {
    Quadratic(Quadratic),
    Mlp(Mlp),
    Bigram(Bigram),
}

/// An immutable task instance: model structure, data generator, initial
/// parameters and a fixed evaluation set.
#[derive(Debug, Clone)]
pub struct Task {
    spec: TaskSpec,
    seed: u64,
    model: Model,
    init: Vec<f64>,
    eval: Batch,
}

pub(crate) fn normal(rng: &mut impl rand::Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Builds a task deterministically from `(spec, seed)`.
pub fn make_task(spec: &TaskSpec, seed: u64) -> Result<Task> {
    spec.validate("task")?;
    let mut teacher_rng = RngState::new(seed, streams::TEACHER).generator();
    let mut init_rng = RngState::new(seed, streams::INIT).generator();
    let mut eval_rng = RngState::new(seed, streams::EVAL).generator();
    let (model, init, eval) = match *spec {
        TaskSpec::Quadratic {
            dim,
            condition,
            noise,
            eval_size,
        } => {
            let q = Quadratic::new(dim, condition, noise, &mut teacher_rng);
            let init = q.init_params(&mut init_rng);
            let eval = q.sample(&mut eval_rng, eval_size);
            (Model::Quadratic(q), init, eval)
        }
        TaskSpec::MlpRegression {
            input_dim,
            hidden,
            noise,
            eval_size,
        } => {
            let m = Mlp::new(input_dim, hidden, noise, &mut teacher_rng);
            let init = m.init_params(&mut init_rng);
            let eval = m.sample(&mut eval_rng, eval_size);
            (Model::Mlp(m), init, eval)
        }
        TaskSpec::BigramLm {
            alphabet,
            corpus_len,
            peakedness,
            eval_size,
        } => {
            let mut corpus_rng = RngState::new(seed, streams::CORPUS).generator();
            let b = Bigram::new(alphabet, corpus_len, peakedness, &mut teacher_rng, &mut corpus_rng);
            let init = b.init_params();
            let eval = b.eval_batch(&mut eval_rng, eval_size);
            (Model::Bigram(b), init, eval)
        }
    };
    Ok(Task {
        spec: spec.clone(),
        seed,
        model,
        init,
        eval,
    })
}

impl Task {
    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn kind(&self) -> TaskKind {
        self.spec.kind()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_params(&self) -> usize {
        self.init.len()
    }

    pub fn init_params(&self) -> Vec<f64> {
        self.init.clone()
    }

    pub fn layout(&self) -> ParamLayout {
        match &self.model {
            Model::Quadratic(q) => ParamLayout::single(q.dim()),
            Model::Mlp(m) => m.layout(),
            Model::Bigram(b) => ParamLayout::single(b.num_params()),
        }
    }

    pub fn eval_set(&self) -> &Batch {
        &self.eval
    }

    pub fn quadratic(&self) -> Option<&Quadratic> {
        match &self.model {
            Model::Quadratic(q) => Some(q),
            _ => None,
        }
    }

    pub fn bigram(&self) -> Option<&Bigram> {
        match &self.model {
            Model::Bigram(b) => Some(b),
            _ => None,
        }
    }

    fn check_shape(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        Ok(())
    }

    fn objective(&self, params: &[f64], batch: &Batch, grads: Option<&mut [f64]>) -> f64 {
        match &self.model {
            Model::Quadratic(q) => q.loss_grad(params, batch, grads),
            Model::Mlp(m) => m.loss_grad(params, batch, grads),
            Model::Bigram(b) => b.loss_grad(params, batch, grads),
        }
    }

    /// Loss and exact gradient on `batch`, writing the gradient into `grads`.
    /// Overflow is not trapped: it surfaces as non-finite values.
    pub fn forward_backward_into(&self, params: &[f64], batch: &Batch, grads: &mut [f64]) -> Result<f64> {
        self.check_shape(params)?;
        self.check_shape(grads)?;
        Ok(self.objective(params, batch, Some(grads)))
    }

    pub fn forward_backward(&self, params: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
        let mut grads = vec![0.0; params.len()];
        let loss = self.forward_backward_into(params, batch, &mut grads)?;
        Ok((loss, grads))
    }

    /// Loss only.
    pub fn loss(&self, params: &[f64], batch: &Batch) -> Result<f64> {
        self.check_shape(params)?;
        Ok(self.objective(params, batch, None))
    }

    /// Mean loss over the fixed evaluation set. Non-finite parameters give a
    /// non-finite loss rather than an error.
    pub fn evaluate(&self, params: &[f64]) -> Result<EvalResult> {
        self.check_shape(params)?;
        Ok(EvalResult::from_loss(self.objective(params, &self.eval, None)))
    }

    /// Draws the batch addressed by `rng` and returns the advanced state.
    pub fn sample_batch(&self, rng: RngState, batch_size: usize) -> (Batch, RngState) {
        let batch_size = batch_size.max(1);
        let mut gen = rng.generator();
        let batch = match &self.model {
            Model::Quadratic(q) => q.sample(&mut gen, batch_size),
            Model::Mlp(m) => m.sample(&mut gen, batch_size),
            Model::Bigram(b) => b.sample(&mut gen, batch_size),
        };
        (batch, rng.advanced())
    }
}
