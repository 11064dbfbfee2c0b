//! Stress harness: single training runs, divergence calibration, outlier
//! injection and paired baseline-vs-guard suites.

mod calibrate;
mod exec;
mod inject;
mod run;
mod suite;

pub use calibrate::{calibrate_divergence_lr, calibrate_rates, CalibratedRates, CalibrationProbe};
pub use exec::{execute, execute_sequential};
#[cfg(feature = "parallel")]
pub use exec::execute_parallel;
pub use inject::{inject_outliers, InjectionMode, InjectionSchedule, InjectionSpec};
pub use run::{run_training, Arm, EvalPoint, RunConfig, RunResult, ScheduleSpec};
pub use suite::{e2e_speedup, ppl_reduction, run_suite, seed_stats, ComparisonRow, PairSpec, SeedStats};

/// Final loss non-finite or more than twice the initial loss.
pub fn is_severely_degraded(initial_loss: f64, final_loss: f64) -> bool {
    !final_loss.is_finite() || final_loss > 2.0 * initial_loss
}

/// Final loss strictly below the initial loss.
pub fn is_trainable(initial_loss: f64, final_loss: f64) -> bool {
    final_loss.is_finite() && final_loss < initial_loss
}
