//! Suite configuration files and end-to-end suite execution.
//!
//! A suite file is a JSON document naming tasks, shared optimizer / guard /
//! clip / schedule settings, and a list of scenarios. Parsing fills in every
//! default so that the resolved configuration can be echoed next to the
//! results and parsed back to the same value.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::governor::GuardConfig;
use crate::harness::{
    calibrate_rates, run_suite, Arm, CalibratedRates, CalibrationProbe, ComparisonRow, InjectionMode, InjectionSpec,
    PairSpec, RunConfig, ScheduleSpec,
};
use crate::optimizer::{ClipConfig, OptimizerConfig};
use crate::report::{self, ReportBundle};
use crate::trainkit::TaskSpec;
use crate::{Error, Result};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const CALIBRATION_FILE: &str = "calibration.json";

pub const DEFAULT_SEEDS: [u64; 3] = [7, 42, 123];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Baseline vs guard at a stressful learning rate.
    LrStress,
    /// Clip-only baselines vs guard under outlier injection.
    ClipBaseline,
    /// Baseline vs guard under outlier injection.
    Injection,
    /// Long guarded run at a stressful learning rate.
    LongBudget,
    /// Baseline vs guard repeated over a seed list.
    SeedSweep,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::LrStress => "lr_stress",
            ScenarioKind::ClipBaseline => "clip_baseline",
            ScenarioKind::Injection => "injection",
            ScenarioKind::LongBudget => "long_budget",
            ScenarioKind::SeedSweep => "seed_sweep",
        }
    }

    fn default_lr(&self) -> LrChoice {
        match self {
            ScenarioKind::LrStress | ScenarioKind::LongBudget | ScenarioKind::SeedSweep => {
                LrChoice::Named(NamedRate::Aggressive)
            }
            ScenarioKind::ClipBaseline | ScenarioKind::Injection => LrChoice::Named(NamedRate::Moderate),
        }
    }

    fn injects(&self) -> bool {
        matches!(self, ScenarioKind::ClipBaseline | ScenarioKind::Injection)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedRate {
    Aggressive,
    Moderate,
    Safe,
}

/// A learning rate given either by value or by calibrated name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LrChoice {
    Named(NamedRate),
    Value(f64),
}

impl LrChoice {
    fn resolve(&self, rates: Option<&CalibratedRates>) -> Option<f64> {
        match (self, rates) {
            (LrChoice::Value(v), _) => Some(*v),
            (LrChoice::Named(NamedRate::Aggressive), Some(r)) => Some(r.aggressive),
            (LrChoice::Named(NamedRate::Moderate), Some(r)) => Some(r.moderate),
            (LrChoice::Named(NamedRate::Safe), Some(r)) => Some(r.safe),
            (LrChoice::Named(_), None) => None,
        }
    }
}

/// Shared run-loop settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub steps: u64,
    pub batch_size: usize,
    pub eval_every: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 32,
            eval_every: 100,
        }
    }
}

/// One scenario entry. Optional fields are filled in during parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Scenario id used in reports; defaults to the kind name.
    #[serde(default)]
    pub name: Option<String>,
    /// Key into the `tasks` table; defaults to the first task.
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub lr: Option<LrChoice>,
    #[serde(default)]
    pub steps: Option<u64>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Injection schedule; `clip_baseline` and `injection` default to a
    /// ×50 outlier batch every 100 steps.
    #[serde(default)]
    pub injection: Option<InjectionSpec>,
    /// Clip thresholds of the clip-only baselines (`clip_baseline` only).
    #[serde(default)]
    pub clips: Option<Vec<f64>>,
    /// Clipping settings of the guarded arms; `clip_baseline` defaults to
    /// both plain guard and guard + clip 1.0.
    #[serde(default)]
    pub guard_clips: Option<Vec<ClipConfig>>,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            name: None,
            task: None,
            lr: None,
            steps: None,
            batch_size: None,
            seeds: None,
            injection: None,
            clips: None,
            guard_clips: None,
        }
    }

    pub fn id(&self) -> &str {
        self.name.as_deref().unwrap_or(self.kind.as_str())
    }
}

fn default_tasks() -> BTreeMap<String, TaskSpec> {
    BTreeMap::new()
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default = "default_tasks")]
    pub tasks: BTreeMap<String, TaskSpec>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub guard: GuardConfig,
    /// Clipping for both arms of every scenario except `clip_baseline`.
    #[serde(default)]
    pub clip: ClipConfig,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub run: RunParams,
    #[serde(default)]
    pub calibration: CalibrationProbe,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        let mut cfg = Self {
            tasks: BTreeMap::from([("bigram".to_string(), TaskSpec::default_for(crate::trainkit::TaskKind::BigramLm))]),
            optimizer: OptimizerConfig::default(),
            guard: GuardConfig::default(),
            clip: ClipConfig::DISABLED,
            schedule: ScheduleSpec::default(),
            run: RunParams::default(),
            calibration: CalibrationProbe::default(),
            scenarios: Vec::new(),
            seeds: default_seeds(),
            output_dir: default_output_dir(),
        };
        cfg.resolve().expect("default suite configuration is valid");
        cfg
    }
}

/// Parses a suite configuration from JSON text, applies defaults and
/// validates it. Errors name the offending key.
pub fn parse_config(text: &str) -> Result<SuiteConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: SuiteConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        Error::config(if key == "." { "<root>".to_string() } else { key }, e.into_inner().to_string())
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SuiteConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

impl SuiteConfig {
    /// Serializes the fully resolved configuration.
    pub fn emit(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fills every optional field with its effective value, then validates.
    pub fn resolve(&mut self) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::config("tasks", "at least one task is required"));
        }
        for (name, spec) in &self.tasks {
            spec.validate(&format!("tasks.{name}"))?;
        }
        self.optimizer.validate()?;
        self.guard.validate()?;
        self.clip.validate("clip")?;
        self.schedule.validate()?;
        self.calibration.validate("calibration")?;
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.run.batch_size == 0 {
            return Err(Error::config("run.batch_size", "must be at least 1"));
        }

        if self.scenarios.is_empty() {
            self.scenarios = self
                .tasks
                .keys()
                .map(|t| {
                    let mut s = Scenario::new(ScenarioKind::LrStress);
                    if self.tasks.len() > 1 {
                        s.name = Some(format!("lr_stress_{t}"));
                    }
                    s.task = Some(t.clone());
                    s
                })
                .collect();
        }

        let first_task = self.tasks.keys().next().cloned().unwrap_or_default();
        let mut ids = BTreeSet::new();
        for (i, s) in self.scenarios.iter_mut().enumerate() {
            let key = |f: &str| format!("scenarios[{i}].{f}");
            s.name.get_or_insert_with(|| s.kind.as_str().to_string());
            let task = s.task.get_or_insert_with(|| first_task.clone());
            if !self.tasks.contains_key(task.as_str()) {
                return Err(Error::config(key("task"), format!("unknown task `{task}`")));
            }
            s.lr.get_or_insert(s.kind.default_lr());
            if let Some(LrChoice::Value(v)) = s.lr {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::config(key("lr"), format!("must be > 0, got {v}")));
                }
            }
            let steps = *s.steps.get_or_insert(match s.kind {
                ScenarioKind::LongBudget => 5000,
                _ => self.run.steps,
            });
            if steps == 0 {
                return Err(Error::config(key("steps"), "must be at least 1"));
            }
            if self.run.eval_every == 0 || self.run.eval_every > steps {
                return Err(Error::config(
                    "run.eval_every",
                    format!("must lie in [1, {steps}] for scenario `{}`", s.id()),
                ));
            }
            if *s.batch_size.get_or_insert(self.run.batch_size) == 0 {
                return Err(Error::config(key("batch_size"), "must be at least 1"));
            }
            let seeds = s.seeds.get_or_insert_with(|| self.seeds.clone());
            if seeds.is_empty() {
                return Err(Error::config(key("seeds"), "at least one seed is required"));
            }
            if s.injection.is_none() && s.kind.injects() {
                s.injection = Some(InjectionSpec::periodic(100, 50.0, InjectionMode::OutlierBatch));
            }
            if let Some(inj) = &s.injection {
                inj.validate(&key("injection"), steps)?;
            }
            let clips = s.clips.get_or_insert_with(|| match s.kind {
                ScenarioKind::ClipBaseline => vec![1.0, 0.5],
                _ => Vec::new(),
            });
            if s.kind == ScenarioKind::ClipBaseline && clips.is_empty() {
                return Err(Error::config(key("clips"), "clip_baseline needs at least one threshold"));
            }
            for g in clips.iter() {
                ClipConfig::global_norm(*g).validate(&key("clips"))?;
            }
            let guard_clips = s.guard_clips.get_or_insert_with(|| match s.kind {
                ScenarioKind::ClipBaseline => vec![ClipConfig::DISABLED, ClipConfig::global_norm(1.0)],
                _ => vec![self.clip],
            });
            if guard_clips.is_empty() {
                return Err(Error::config(key("guard_clips"), "at least one guarded arm is required"));
            }
            for c in guard_clips.iter() {
                c.validate(&key("guard_clips"))?;
            }
            if !ids.insert(s.id().to_string()) {
                return Err(Error::config(key("name"), format!("duplicate scenario id `{}`", s.id())));
            }
        }
        Ok(())
    }

    /// A baseline run template for `task` with the shared settings.
    pub fn run_template(&self, task: &str) -> Result<RunConfig> {
        let spec = self
            .tasks
            .get(task)
            .ok_or_else(|| Error::config("task", format!("unknown task `{task}`")))?;
        Ok(RunConfig {
            task: spec.clone(),
            optimizer: self.optimizer,
            schedule: self.schedule,
            arm: Arm::Baseline,
            clip: self.clip,
            steps: self.run.steps,
            batch_size: self.run.batch_size,
            eval_every: self.run.eval_every,
            seed: self.seeds[0],
            injection: None,
        })
    }

    /// Tasks whose scenarios refer to calibrated (named) learning rates.
    pub fn tasks_needing_calibration(&self) -> BTreeSet<String> {
        self.scenarios
            .iter()
            .filter(|s| matches!(s.lr, Some(LrChoice::Named(_))))
            .filter_map(|s| s.task.clone())
            .collect()
    }

    /// Calibrates aggressive / moderate / safe rates for every task that
    /// needs them, over the suite seeds.
    pub fn calibrate(&self) -> Result<BTreeMap<String, CalibratedRates>> {
        self.tasks_needing_calibration()
            .into_iter()
            .map(|task| {
                let template = self.run_template(&task)?;
                calibrate_rates(&template, &self.calibration, &self.seeds).map(|r| (task, r))
            })
            .collect()
    }

    /// Expands scenarios into baseline/guarded run pairs.
    pub fn plan(&self, rates: &BTreeMap<String, CalibratedRates>) -> Result<Vec<PairSpec>> {
        let mut pairs = Vec::new();
        for (i, s) in self.scenarios.iter().enumerate() {
            let task = s.task.as_deref().unwrap_or_default();
            let lr = s
                .lr
                .unwrap_or(s.kind.default_lr())
                .resolve(rates.get(task))
                .ok_or_else(|| Error::config(format!("scenarios[{i}].lr"), format!("task `{task}` was not calibrated")))?;
            let mut template = self.run_template(task)?;
            template.optimizer.lr = lr;
            template.steps = s.steps.unwrap_or(self.run.steps);
            template.batch_size = s.batch_size.unwrap_or(self.run.batch_size);
            template.injection = s.injection.clone();

            let default_guard = [self.clip];
            let guard_clips = s.guard_clips.as_deref().unwrap_or(&default_guard);
            let baselines: Vec<ClipConfig> = match s.kind {
                ScenarioKind::ClipBaseline => s
                    .clips
                    .iter()
                    .flatten()
                    .map(|g| ClipConfig::global_norm(*g))
                    .collect(),
                _ => vec![self.clip],
            };
            for &seed in s.seeds.as_deref().unwrap_or(&self.seeds) {
                for &clip in &baselines {
                    for &guard_clip in guard_clips {
                        let mut baseline = template.clone();
                        baseline.seed = seed;
                        baseline.clip = clip;
                        let mut guarded = baseline.clone();
                        guarded.arm = Arm::Guarded(self.guard);
                        guarded.clip = guard_clip;
                        pairs.push(PairSpec {
                            scenario: s.id().to_string(),
                            baseline,
                            guarded,
                        });
                    }
                }
            }
        }
        Ok(pairs)
    }
}

/// Everything produced by [`execute_suite`].
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub rows: Vec<ComparisonRow>,
    pub rates: BTreeMap<String, CalibratedRates>,
    pub bundle: ReportBundle,
}

/// Calibrates, runs every scenario and writes all artifacts into `out_dir`:
/// the resolved configuration, calibrated rates, per-run telemetry, the
/// suite CSV and the markdown report.
pub fn execute_suite(cfg: &SuiteConfig, out_dir: &Path) -> Result<SuiteOutcome> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let resolved = out_dir.join(RESOLVED_CONFIG_FILE);
    fs::write(&resolved, cfg.emit()?).map_err(|e| Error::io(&resolved, e))?;

    let rates = cfg.calibrate()?;
    let cal = out_dir.join(CALIBRATION_FILE);
    fs::write(&cal, serde_json::to_string_pretty(&rates)?).map_err(|e| Error::io(&cal, e))?;

    let pairs = cfg.plan(&rates)?;
    let rows = run_suite(&pairs)?;
    let bundle = report::write_bundle(out_dir, &rows)?;
    Ok(SuiteOutcome { rows, rates, bundle })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_all_defaults() {
        let cfg = parse_config(r#"{"tasks": {"q": {"kind": "quadratic"}}}"#).unwrap();
        assert_eq!(cfg.guard, GuardConfig::default());
        assert_eq!(cfg.seeds, vec![7, 42, 123]);
        assert_eq!(cfg.scenarios.len(), 1);
        let s = &cfg.scenarios[0];
        assert_eq!(s.name.as_deref(), Some("lr_stress"));
        assert_eq!(s.task.as_deref(), Some("q"));
        assert_eq!(s.steps, Some(1000));
        let echoed = cfg.emit().unwrap();
        for key in ["auto_enabled", "recovery_confirm", "min_lr_ratio", "eval_every", "condition", "output_dir"] {
            assert!(echoed.contains(key), "{key} missing from echo");
        }
    }

    #[test]
    fn roundtrip() {
        let text = r#"{
            "tasks": {"lm": {"kind": "bigram_lm", "alphabet": 8}, "q": {"kind": "quadratic"}},
            "scenarios": [
                {"kind": "clip_baseline", "task": "lm", "lr": 0.01},
                {"kind": "long_budget", "task": "q"},
                {"kind": "seed_sweep", "task": "lm", "lr": "safe", "seeds": [1, 2]}
            ]
        }"#;
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.emit().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    fn err_key(text: &str) -> String {
        match parse_config(text) {
            Err(Error::InvalidConfig { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_threshold_ordering() {
        let key = err_key(r#"{"tasks": {"q": {"kind": "quadratic"}}, "guard": {"spike_threshold": 1.2, "stress_threshold": 1.5}}"#);
        assert_eq!(key, "guard.spike_threshold");
    }

    #[test]
    fn rejects_c_max_above_one() {
        let key = err_key(r#"{"tasks": {"q": {"kind": "quadratic"}}, "guard": {"c_max": 1.5}}"#);
        assert_eq!(key, "guard.c_max");
    }

    #[test]
    fn rejects_unknown_keys_with_path() {
        let key = err_key(r#"{"tasks": {"q": {"kind": "quadratic"}}, "guard": {"c_mx": 1.0}}"#);
        assert!(key.starts_with("guard"), "{key}");
        let key = err_key(r#"{"tasks": {"q": {"kind": "quadratic"}}, "bogus": 1}"#);
        assert!(key.contains("bogus") || key == "<root>", "{key}");
    }

    #[test]
    fn rejects_type_mismatch() {
        let key = err_key(r#"{"tasks": {"q": {"kind": "quadratic"}}, "run": {"steps": "many"}}"#);
        assert_eq!(key, "run.steps");
    }

    #[test]
    fn plan_pairs_differ_only_in_arm_and_clip() {
        let cfg = parse_config(
            r#"{"tasks": {"q": {"kind": "quadratic", "dim": 4}},
                "scenarios": [{"kind": "clip_baseline", "lr": 0.01, "steps": 200}]}"#,
        )
        .unwrap();
        let pairs = cfg.plan(&BTreeMap::new()).unwrap();
        // 3 seeds × 2 clip-only baselines × 2 guarded arms
        assert_eq!(pairs.len(), 12);
        for p in &pairs {
            p.check_pairing().unwrap();
            assert!(p.baseline.clip.g.is_some());
            assert!(matches!(p.guarded.arm, Arm::Guarded(_)));
        }
        let labels: BTreeSet<String> = pairs.iter().map(|p| p.guarded.label()).collect();
        assert_eq!(labels, BTreeSet::from(["guard".to_string(), "guard+clip1.0".to_string()]));
    }

    #[test]
    fn named_rate_without_calibration_is_an_error() {
        let cfg = parse_config(r#"{"tasks": {"q": {"kind": "quadratic"}}}"#).unwrap();
        assert!(cfg.plan(&BTreeMap::new()).is_err());
    }
}
