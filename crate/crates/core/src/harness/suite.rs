use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::exec::execute;
use super::run::{run_training, Arm, RunConfig, RunResult};
use crate::optimizer::ClipConfig;
use crate::{Error, Result};

/// One baseline-vs-guarded comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub scenario: String,
    pub baseline: RunConfig,
    pub guarded: RunConfig,
}

impl PairSpec {
    /// Checks that the two runs differ only in governance and clipping.
    pub fn check_pairing(&self) -> Result<()> {
        let strip = |c: &RunConfig| {
            let mut c = c.clone();
            c.arm = Arm::Baseline;
            c.clip = ClipConfig::DISABLED;
            c
        };
        let (b, g) = (strip(&self.baseline), strip(&self.guarded));
        let pairing = |field: &str| Error::Pairing {
            scenario: self.scenario.clone(),
            reason: format!("`{field}` differs between baseline and guarded run"),
        };
        if b.task != g.task {
            return Err(pairing("task"));
        }
        if b.seed != g.seed {
            return Err(pairing("seed"));
        }
        if b.optimizer != g.optimizer {
            return Err(pairing("optimizer"));
        }
        if b.schedule != g.schedule {
            return Err(pairing("schedule"));
        }
        if b.injection != g.injection {
            return Err(pairing("injection"));
        }
        if b != g {
            return Err(pairing("run length or batching"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub seed: u64,
    pub baseline_arm: String,
    pub guarded_arm: String,
    pub baseline: Option<RunResult>,
    pub guarded: Option<RunResult>,
    /// First error hit by either run of the pair.
    pub error: Option<String>,
}

impl ComparisonRow {
    /// `1 − guarded_ppl / baseline_ppl`.
    pub fn ppl_reduction(&self) -> Option<f64> {
        let (b, g) = (self.baseline.as_ref()?, self.guarded.as_ref()?);
        Some(ppl_reduction(b.final_perplexity, g.final_perplexity))
    }

    /// `baseline_wall / guarded_wall`.
    pub fn e2e_speedup(&self) -> Option<f64> {
        let (b, g) = (self.baseline.as_ref()?, self.guarded.as_ref()?);
        Some(e2e_speedup(b.wall_seconds, g.wall_seconds))
    }
}

pub fn ppl_reduction(baseline_ppl: f64, guarded_ppl: f64) -> f64 {
    1.0 - guarded_ppl / baseline_ppl
}

pub fn e2e_speedup(baseline_wall: f64, guarded_wall: f64) -> f64 {
    baseline_wall / guarded_wall
}

/// Across-seed mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std: f64,
}

pub fn seed_stats(values: &[f64]) -> SeedStats {
    let n = values.len();
    if n == 0 {
        return SeedStats {
            n,
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    SeedStats { n, mean, std }
}

/// Executes every pair and returns rows sorted by scenario id, then seed.
///
/// Identical run configurations shared between pairs (e.g. one guarded run
/// compared against two clipping baselines) are executed once. A failing
/// run is recorded on its row and the suite continues.
pub fn run_suite(pairs: &[PairSpec]) -> Result<Vec<ComparisonRow>> {
    if pairs.is_empty() {
        return Err(Error::config("scenarios", "suite has no runs"));
    }
    for p in pairs {
        p.check_pairing()?;
    }

    let mut unique: Vec<RunConfig> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut slot = |cfg: &RunConfig| -> Result<usize> {
        let key = serde_json::to_string(cfg)?;
        Ok(*index.entry(key).or_insert_with(|| {
            unique.push(cfg.clone());
            unique.len() - 1
        }))
    };
    let mut slots = Vec::with_capacity(pairs.len());
    for p in pairs {
        slots.push((slot(&p.baseline)?, slot(&p.guarded)?));
    }

    let results: Vec<std::result::Result<RunResult, String>> =
        execute(&unique, |cfg| run_training(cfg).map_err(|e| e.to_string()));

    let mut rows: Vec<ComparisonRow> = pairs
        .iter()
        .zip(slots)
        .map(|(p, (bi, gi))| {
            let (b, g) = (&results[bi], &results[gi]);
            ComparisonRow {
                scenario: p.scenario.clone(),
                seed: p.baseline.seed,
                baseline_arm: p.baseline.label(),
                guarded_arm: p.guarded.label(),
                baseline: b.as_ref().ok().cloned(),
                guarded: g.as_ref().ok().cloned(),
                error: b.as_ref().err().or(g.as_ref().err()).cloned(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.scenario.cmp(&b.scenario).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}
