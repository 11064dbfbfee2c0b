//! Bounded training-control governance layered over a from-scratch AdamW.
//!
//! The crate is split into two planes. The optimizer plane ([`optimizer`])
//! computes AdamW updates, global-norm clipping and the learning-rate
//! schedule. The governance plane ([`governor`]) senses per-step telemetry,
//! classifies the run into a [`governor::Regime`], selects a bounded
//! [`governor::ControlPosture`] and logs what it did. [`optimizer::guarded_step`]
//! composes the two without ever changing the AdamW update rule; it only
//! modulates the magnitude of the applied step.
//!
//! [`trainkit`] provides desk-scale differentiable tasks with exact gradients,
//! and [`harness`] drives stress scenarios (learning-rate stress, clipping
//! baselines, outlier injection, long budgets, seed sweeps). [`suite`] parses
//! suite configuration files and [`report`] renders CSV/markdown reports.

pub mod error;
pub mod governor;
pub mod harness;
pub mod optimizer;
pub mod report;
pub mod rng;
pub mod suite;
pub mod trainkit;

pub use error::{Error, Result};
