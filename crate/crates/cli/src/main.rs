//! `eve`: verification suite, single runs, sweeps and reports.
//!
//! Exit codes: 0 success, 1 a check or run failed, 2 bad usage or config.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use eve_core::harness::{
    self, format_table_row, ExperimentConfig, OptimizerKind, RunCell, RunRecord, SummaryField,
};
use eve_core::verify::run_suite;

use config::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "eve", version, about = "EVE optimizer experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the numerical verification suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Train a single configuration: first grid point, first seed.
    Run(RunArgs),
    /// Train every (lr1, lr2, seed) cell and export CSVs, JSON and plots.
    Sweep(RunArgs),
    /// Rebuild stats.json and plots from the run CSVs in a directory.
    Report {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Root seed; per-run seeds are expanded from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    optimizer: Option<String>,
    /// Replaces the primary grid with this single rate.
    #[arg(long)]
    lr1: Option<f64>,
    /// Replaces the secondary grid with this single rate (EVE only).
    #[arg(long)]
    lr2: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

enum Failure {
    Usage(ConfigError),
    Run(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

/// The config file with command-line overrides applied and validated.
fn resolve(args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let (mut cfg, text) = config::load(&args.config)?;
    let flag_error = |msg: String| ConfigError {
        path: args.config.clone(),
        line: None,
        msg,
    };
    if let Some(name) = &args.optimizer {
        cfg.optimizer = name
            .parse::<OptimizerKind>()
            .map_err(|e| flag_error(format!("--optimizer: {e}")))?;
        if cfg.optimizer != OptimizerKind::Eve && args.lr2.is_none() {
            cfg.lr2_grid = None;
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.seeds = None;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(x) = args.lr1 {
        cfg.lr_grid = vec![x];
    }
    if let Some(x) = args.lr2 {
        cfg.lr2_grid = Some(vec![x]);
    }
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    config::validate(&cfg, &text, &args.config)?;
    Ok(cfg)
}

fn describe(rec: &RunRecord) -> String {
    let lr2 = rec
        .cell
        .lr2
        .map(|x| format!(" lr2={x:.3e}"))
        .unwrap_or_default();
    let status = match (&rec.error, rec.diverged) {
        (Some(e), _) => format!("error: {e}"),
        (None, true) => format!("diverged at step {}", rec.diverged_at.unwrap_or(0)),
        (None, false) => "ok".to_string(),
    };
    let fin = rec
        .final_loss()
        .map(|x| format!("{x:.6e}"))
        .unwrap_or_else(|| "-".into());
    format!(
        "#{:04} {} lr1={:.3e}{lr2} seed={} final_loss={fin} {status}",
        rec.cell.index,
        rec.optimizer.name(),
        rec.cell.lr1,
        rec.cell.seed
    )
}

fn any_errors(records: &[RunRecord]) -> bool {
    records.iter().any(|r| r.error.is_some())
}

fn cmd_verify(seed: u64, json: Option<&Path>) -> Result<bool> {
    let report = run_suite(seed);
    for c in &report.checks {
        let tag = match (c.passed, c.gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "INFO",
        };
        let measured: Vec<String> = c
            .measured
            .iter()
            .map(|(k, v)| format!("{k}={v:.3e}"))
            .collect();
        println!("{tag} {} {}", c.name, measured.join(" "));
    }
    let failed = report.failed().count();
    println!("{} checks, {failed} failed", report.checks.len());
    if let Some(path) = json {
        let mut body = serde_json::to_vec_pretty(&report)?;
        body.push(b'\n');
        fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(report.passed)
}

fn cmd_run(cfg: &ExperimentConfig) -> Result<bool> {
    let cell = RunCell {
        index: 0,
        ..cfg.cells()[0]
    };
    let rec =
        harness::run_experiment(cfg, &cell).unwrap_or_else(|e| RunRecord::failed(cfg, cell, e));
    println!("{}", describe(&rec));
    let dir = &cfg.out_dir;
    let summary = harness::export(cfg, std::slice::from_ref(&rec), dir)
        .with_context(|| format!("exporting to {}", dir.display()))?;
    println!("wrote {}", dir.join(&summary.per_run[0].csv).display());
    Ok(rec.error.is_none())
}

fn cmd_sweep(cfg: &ExperimentConfig) -> Result<bool> {
    let records = harness::sweep(cfg).context("running sweep")?;
    for r in &records {
        println!("{}", describe(r));
    }
    let dir = &cfg.out_dir;
    let summary = harness::export(cfg, &records, dir)
        .with_context(|| format!("exporting to {}", dir.display()))?;
    let pooling = match cfg.pooling {
        SummaryField::Series => "series",
        SummaryField::FinalValLoss => "final_val_loss",
        SummaryField::BestValLoss => "best_val_loss",
    };
    match &summary.stats {
        Some(s) => println!(
            "{pooling} median / mean / std / min: {}",
            format_table_row(s)
        ),
        None => println!("{pooling}: no finite losses"),
    }
    println!("wrote {} runs to {}", records.len(), dir.display());
    Ok(!any_errors(&records))
}

fn cmd_report(dir: &Path) -> Result<bool, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Usage(ConfigError {
            path: dir.to_path_buf(),
            line: None,
            msg: "not a directory".into(),
        }));
    }
    let stats = harness::report(dir).with_context(|| format!("reporting on {}", dir.display()))?;
    for (field, row) in &stats.table_rows {
        println!("{field} median / mean / std / min: {row}");
    }
    println!("wrote {}", dir.join(harness::STATS_FILE).display());
    Ok(true)
}

fn dispatch(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Verify { seed, json } => Ok(cmd_verify(seed, json.as_deref())?),
        Command::Run(args) => Ok(cmd_run(&resolve(&args)?)?),
        Command::Sweep(args) => Ok(cmd_sweep(&resolve(&args)?)?),
        Command::Report { out } => cmd_report(&out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
