//! `trainguard` command-line front end: single runs, suites, learning-rate
//! calibration and report re-rendering.
//!
//! Failures print a JSON object `{"error": <kind>, "message": <text>}` on
//! stderr and exit with status 1.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use trainguard::harness::{calibrate_rates, run_training, Arm, ComparisonRow, RunConfig};
use trainguard::optimizer::ClipConfig;
use trainguard::report::{self, CsvRow};
use trainguard::suite::{execute_suite, load_config, SuiteConfig};
use trainguard::Error;

#[derive(Parser, Debug)]
#[command(name = "trainguard", version, about = "Bounded training-control governance stress suite")]
struct Cli {
    /// Suite configuration file (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run with this single seed instead of the configured seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress normal stdout output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ArmChoice {
    Adamw,
    Guard,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute one training run.
    Run {
        /// Task name from the configuration; defaults to the first task.
        #[arg(long)]
        task: Option<String>,
        #[arg(long, value_enum, default_value = "guard")]
        arm: ArmChoice,
        /// Base learning rate; defaults to `optimizer.lr`.
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        steps: Option<u64>,
        /// Global-norm clip threshold.
        #[arg(long)]
        clip: Option<f64>,
    },
    /// Calibrate rates and execute every configured scenario.
    Suite,
    /// Print the calibrated learning rates of a task.
    Calibrate {
        #[arg(long)]
        task: Option<String>,
    },
    /// Re-render the markdown report from an existing suite CSV.
    Report {
        /// Results directory; defaults to `--out` or the configured output.
        dir: Option<PathBuf>,
    },
}

fn load(cli: &Cli) -> Result<SuiteConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => SuiteConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
        for s in &mut cfg.scenarios {
            s.seeds = Some(vec![seed]);
        }
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn pick_task(cfg: &SuiteConfig, task: &Option<String>) -> String {
    task.clone()
        .unwrap_or_else(|| cfg.tasks.keys().next().cloned().unwrap_or_default())
}

fn cmd_run(
    cli: &Cli,
    task: &Option<String>,
    arm: ArmChoice,
    lr: Option<f64>,
    steps: Option<u64>,
    clip: Option<f64>,
) -> Result<(), Error> {
    let cfg = load(cli)?;
    let mut run: RunConfig = cfg.run_template(&pick_task(&cfg, task))?;
    if let Some(lr) = lr {
        run.optimizer.lr = lr;
    }
    if let Some(steps) = steps {
        run.steps = steps;
        run.eval_every = run.eval_every.min(steps);
    }
    if clip.is_some() {
        run.clip = ClipConfig { g: clip };
    }
    if arm == ArmChoice::Guard {
        run.arm = Arm::Guarded(cfg.guard);
    }
    let result = run_training(&run)?;

    let out = &cfg.output_dir;
    let runs_dir = out.join(report::RUNS_DIR);
    std::fs::create_dir_all(&runs_dir).map_err(|e| Error::Io { path: runs_dir.clone(), source: e })?;
    let stem = report::run_stem("run", &result.arm, result.seed);
    let (jsonl, summary) = report::write_run(&runs_dir, &stem, &result)?;
    let row = ComparisonRow {
        scenario: "run".into(),
        seed: result.seed,
        baseline_arm: result.arm.clone(),
        guarded_arm: result.arm.clone(),
        baseline: None,
        guarded: Some(result.clone()),
        error: None,
    };
    let rows: Vec<CsvRow> = report::csv_rows(&[row]);
    report::write_csv(&out.join(report::CSV_FILE), &rows)?;

    if !cli.quiet {
        let doc = json!({
            "arm": result.arm,
            "seed": result.seed,
            "lr": result.lr,
            "initial_loss": report::fmt4(result.initial_loss),
            "final_loss": report::fmt4(result.final_loss),
            "final_ppl": report::fmt4(result.final_perplexity),
            "verdict": report::verdict(result.initial_loss, result.final_loss),
            "summary": result.summary,
            "telemetry": jsonl,
            "summary_file": summary,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    }
    Ok(())
}

fn cmd_suite(cli: &Cli) -> Result<(), Error> {
    let cfg = load(cli)?;
    let outcome = execute_suite(&cfg, &cfg.output_dir)?;
    if !cli.quiet {
        let failed: Vec<_> = outcome.rows.iter().filter_map(|r| r.error.as_ref()).collect();
        for e in &failed {
            eprintln!("run failed: {e}");
        }
        print!("{}", report::render_report(&outcome.rows));
        println!("\nwrote {}", outcome.bundle.markdown.display());
    }
    Ok(())
}

fn cmd_calibrate(cli: &Cli, task: &Option<String>) -> Result<(), Error> {
    let cfg = load(cli)?;
    let name = pick_task(&cfg, task);
    let template = cfg.run_template(&name)?;
    let rates = calibrate_rates(&template, &cfg.calibration, &cfg.seeds)?;
    if !cli.quiet {
        let doc = json!({ "task": name, "rates": rates });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    }
    Ok(())
}

fn cmd_report(cli: &Cli, dir: &Option<PathBuf>) -> Result<(), Error> {
    let dir: PathBuf = match (dir, &cli.out) {
        (Some(d), _) | (None, Some(d)) => d.clone(),
        (None, None) => load(cli)?.output_dir,
    };
    let md = report::rerender(&dir)?;
    let path = dir.join(report::REPORT_FILE);
    std::fs::write(&path, &md).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    if !cli.quiet {
        print!("{md}");
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Run {
            task,
            arm,
            lr,
            steps,
            clip,
        } => cmd_run(cli, task, *arm, *lr, *steps, *clip),
        Command::Suite => cmd_suite(cli),
        Command::Calibrate { task } => cmd_calibrate(cli, task),
        Command::Report { dir } => cmd_report(cli, dir),
    }
}

fn error_json(e: &Error) -> String {
    json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
