//! Suite artifacts: per-run JSONL telemetry and summary JSON, the suite CSV,
//! and the markdown report rendered from that CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::{e2e_speedup, is_severely_degraded, is_trainable, ppl_reduction, seed_stats, ComparisonRow, RunResult};
use crate::{Error, Result};

pub const CSV_FILE: &str = "suite.csv";
pub const REPORT_FILE: &str = "report.md";
pub const RUNS_DIR: &str = "runs";

/// Serializes non-finite floats as the strings `"NaN"`, `"inf"`, `"-inf"`
/// (JSON has no literal for them) and accepts either form back.
pub mod float_token {
    use std::fmt;

    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("NaN")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct FloatVisitor;

    impl Visitor<'_> for FloatVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"NaN\", \"inf\", \"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }
}

/// One line of the suite CSV: one run within one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: String,
    pub arm: String,
    pub seed: u64,
    pub final_loss: f64,
    pub final_ppl: f64,
    pub wall_s: f64,
    pub active_steps: u64,
    pub regime_switches: u64,
    pub control_energy: f64,
    pub initial_loss: f64,
}

impl CsvRow {
    fn from_result(scenario: &str, r: &RunResult) -> Self {
        Self {
            scenario: scenario.to_string(),
            arm: r.arm.clone(),
            seed: r.seed,
            final_loss: r.final_loss,
            final_ppl: r.final_perplexity,
            wall_s: r.wall_seconds,
            active_steps: r.summary.control_active_steps,
            regime_switches: r.summary.regime_switches,
            control_energy: r.summary.control_energy,
            initial_loss: r.initial_loss,
        }
    }

    pub fn is_baseline(&self) -> bool {
        is_baseline_arm(&self.arm)
    }

    pub fn verdict(&self) -> &'static str {
        verdict(self.initial_loss, self.final_loss)
    }
}

/// Arms labelled `adamw...` are baselines; `guard...` arms are governed.
pub fn is_baseline_arm(arm: &str) -> bool {
    arm.starts_with("adamw")
}

pub fn verdict(initial_loss: f64, final_loss: f64) -> &'static str {
    if is_severely_degraded(initial_loss, final_loss) {
        "severe degradation"
    } else if is_trainable(initial_loss, final_loss) {
        "trainable"
    } else {
        "stalled"
    }
}

/// Flattens comparison rows into unique `(scenario, arm, seed)` CSV rows,
/// sorted by scenario, arm and seed.
pub fn csv_rows(rows: &[ComparisonRow]) -> Vec<CsvRow> {
    let mut out: BTreeMap<(String, String, u64), CsvRow> = BTreeMap::new();
    for row in rows {
        for r in [&row.baseline, &row.guarded].into_iter().flatten() {
            out.entry((row.scenario.clone(), r.arm.clone(), r.seed))
                .or_insert_with(|| CsvRow::from_result(&row.scenario, r));
        }
    }
    out.into_values().collect()
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    Ok(r.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?)
}

/// Formats a value at the report's 4-decimal precision.
pub fn fmt4(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else {
        format!("{x}")
    }
}

fn fmt_pct(x: f64) -> String {
    if x.is_finite() {
        format!("{:.1}%", 100.0 * x)
    } else {
        "n/a".to_string()
    }
}

fn fmt_speedup(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3}x")
    } else {
        "n/a".to_string()
    }
}

/// Renders the markdown report. Every number is derived from `rows` alone,
/// so re-rendering from the CSV reproduces the report exactly.
pub fn render_markdown(rows: &[CsvRow]) -> String {
    let mut md = String::from("# Stress suite report\n");
    let mut scenarios: BTreeMap<&str, Vec<&CsvRow>> = BTreeMap::new();
    for r in rows {
        scenarios.entry(&r.scenario).or_default().push(r);
    }

    for (scenario, runs) in &scenarios {
        let _ = writeln!(md, "\n## {scenario}\n");

        md.push_str("| Seed | Arm | Initial loss | Final loss | PPL | Wall (s) | Active steps | Regime switches | Control energy | Verdict |\n");
        md.push_str("|---:|---|---:|---:|---:|---:|---:|---:|---:|---|\n");
        let mut by_seed: Vec<&&CsvRow> = runs.iter().collect();
        by_seed.sort_by(|a, b| a.seed.cmp(&b.seed).then(a.arm.cmp(&b.arm)));
        for r in &by_seed {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                r.seed,
                r.arm,
                fmt4(r.initial_loss),
                fmt4(r.final_loss),
                fmt4(r.final_ppl),
                fmt4(r.wall_s),
                r.active_steps,
                r.regime_switches,
                fmt4(r.control_energy),
                r.verdict()
            );
        }

        let comparisons: Vec<(&CsvRow, &CsvRow)> = by_seed
            .iter()
            .filter(|b| b.is_baseline())
            .flat_map(|b| {
                by_seed
                    .iter()
                    .filter(move |g| !g.is_baseline() && g.seed == b.seed)
                    .map(move |g| (**b, **g))
            })
            .collect();
        if !comparisons.is_empty() {
            md.push_str("\n| Seed | Baseline | Guarded | Baseline PPL | Guarded PPL | PPL reduction | E2E speedup |\n");
            md.push_str("|---:|---|---|---:|---:|---:|---:|\n");
            for (b, g) in comparisons {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    b.seed,
                    b.arm,
                    g.arm,
                    fmt4(b.final_ppl),
                    fmt4(g.final_ppl),
                    fmt_pct(ppl_reduction(b.final_ppl, g.final_ppl)),
                    fmt_speedup(e2e_speedup(b.wall_s, g.wall_s)),
                );
            }
        }

        let mut arms: BTreeMap<&str, Vec<&CsvRow>> = BTreeMap::new();
        for r in runs {
            arms.entry(&r.arm).or_default().push(r);
        }
        md.push_str("\n| Arm | Seeds | Final loss (mean ± std) | PPL (mean ± std) |\n");
        md.push_str("|---|---:|---:|---:|\n");
        for (arm, rs) in &arms {
            let loss = seed_stats(&rs.iter().map(|r| r.final_loss).collect::<Vec<_>>());
            let ppl = seed_stats(&rs.iter().map(|r| r.final_ppl).collect::<Vec<_>>());
            let _ = writeln!(
                md,
                "| {arm} | {} | {} ± {} | {} ± {} |",
                loss.n,
                fmt4(loss.mean),
                fmt4(loss.std),
                fmt4(ppl.mean),
                fmt4(ppl.std)
            );
        }
    }
    md
}

pub fn render_report(rows: &[ComparisonRow]) -> String {
    render_markdown(&csv_rows(rows))
}

/// File stem for one run's artifacts, e.g. `lr_stress__guard+clip1.0__seed42`.
pub fn run_stem(scenario: &str, arm: &str, seed: u64) -> String {
    format!("{scenario}__{arm}__seed{seed}")
}

/// Writes `<stem>.jsonl` and `<stem>.summary.json` for one run.
pub fn write_run(dir: &Path, stem: &str, result: &RunResult) -> Result<(PathBuf, PathBuf)> {
    let jsonl = dir.join(format!("{stem}.jsonl"));
    let file = File::create(&jsonl).map_err(|e| Error::io(&jsonl, e))?;
    let mut w = BufWriter::new(file);
    result.log.write_jsonl(&mut w)?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(&jsonl, e))?;

    let summary = dir.join(format!("{stem}.summary.json"));
    let file = File::create(&summary).map_err(|e| Error::io(&summary, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), result)?;
    Ok((jsonl, summary))
}

/// Paths of everything a suite run wrote.
#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub csv: PathBuf,
    pub markdown: PathBuf,
    pub runs: Vec<PathBuf>,
}

/// Writes per-run telemetry, the suite CSV and the markdown report into `dir`.
pub fn write_bundle(dir: &Path, rows: &[ComparisonRow]) -> Result<ReportBundle> {
    let runs_dir = dir.join(RUNS_DIR);
    fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;

    let mut runs = Vec::new();
    let mut written = std::collections::BTreeSet::new();
    for row in rows {
        for r in [&row.baseline, &row.guarded].into_iter().flatten() {
            let stem = run_stem(&row.scenario, &r.arm, r.seed);
            if written.insert(stem.clone()) {
                let (jsonl, _) = write_run(&runs_dir, &stem, r)?;
                runs.push(jsonl);
            }
        }
    }

    let csv_path = dir.join(CSV_FILE);
    let table = csv_rows(rows);
    write_csv(&csv_path, &table)?;
    let md_path = dir.join(REPORT_FILE);
    let md = render_markdown(&table);
    fs::write(&md_path, md).map_err(|e| Error::io(&md_path, e))?;
    Ok(ReportBundle {
        csv: csv_path,
        markdown: md_path,
        runs,
    })
}

/// Re-renders the markdown report from `dir/suite.csv` without running
/// anything.
pub fn rerender(dir: &Path) -> Result<String> {
    let csv_path = dir.join(CSV_FILE);
    if !csv_path.is_file() {
        return Err(Error::NoResults(dir.to_path_buf()));
    }
    let rows = read_csv(&csv_path)?;
    if rows.is_empty() {
        return Err(Error::NoResults(dir.to_path_buf()));
    }
    Ok(render_markdown(&rows))
}
