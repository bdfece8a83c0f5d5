//! On-disk artifacts of a sweep.
//!
//! Per-run CSVs carry every loss a run produced, written with 17 significant
//! digits so parsing them gives back the exact `f64` values. Everything in
//! `stats.json` and both SVGs is computed from those CSVs alone, which is
//! what lets [`report`] rebuild them without rerunning anything.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, RunCell, SummaryField};
use super::run::{RunRecord, ValPoint};
use super::stats::{format_table_row, summarize, SummaryStats};
use super::svg;
use super::HarnessError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const STATS_FILE: &str = "stats.json";
pub const CURVES_FILE: &str = "loss_curves.svg";
pub const HISTOGRAM_FILE: &str = "final_loss_hist.svg";
const HIST_BINS: usize = 20;

pub fn run_csv_name(rec: &RunRecord) -> String {
    format!("{}-{:04}.csv", rec.optimizer.name(), rec.cell.index)
}

fn is_run_csv(name: &str) -> bool {
    let Some(stem) = name.strip_suffix(".csv") else {
        return false;
    };
    match stem.rsplit_once('-') {
        Some((opt, idx)) => {
            !opt.is_empty()
                && opt.bytes().all(|b| b.is_ascii_lowercase())
                && idx.len() >= 4
                && idx.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `step,train_loss,val_loss[,val_f1]`, one row per step that has a
/// train or validation value. Missing cells are left empty.
pub fn write_run_csv<W: Write>(rec: &RunRecord, mut w: W) -> std::io::Result<()> {
    let mut rows: BTreeMap<usize, (Option<f64>, Option<&ValPoint>)> = BTreeMap::new();
    for (step, &l) in rec.train_loss.iter().enumerate() {
        rows.entry(step).or_default().0 = Some(l);
    }
    for v in &rec.val {
        rows.entry(v.step).or_default().1 = Some(v);
    }
    let mut out = String::from(if rec.classifier {
        "step,train_loss,val_loss,val_f1\n"
    } else {
        "step,train_loss,val_loss\n"
    });
    for (step, (train, val)) in rows {
        out.push_str(&step.to_string());
        out.push(',');
        out.push_str(&train.map(num).unwrap_or_default());
        out.push(',');
        out.push_str(&val.map(|v| num(v.loss)).unwrap_or_default());
        if rec.classifier {
            out.push(',');
            out.push_str(&val.and_then(|v| v.f1).map(num).unwrap_or_default());
        }
        out.push('\n');
    }
    w.write_all(out.as_bytes())
}

/// Series recovered from a run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRun {
    /// File stem, e.g. `eve-0003`.
    pub label: String,
    pub classifier: bool,
    pub train_loss: Vec<f64>,
    pub val: Vec<ValPoint>,
}

impl ParsedRun {
    fn from_record(rec: &RunRecord) -> Self {
        Self {
            label: run_csv_name(rec).trim_end_matches(".csv").to_string(),
            classifier: rec.classifier,
            train_loss: rec.train_loss.clone(),
            val: rec.val.clone(),
        }
    }
}

pub fn read_run_csv(path: &Path) -> Result<ParsedRun, HarnessError> {
    let malformed = |msg: String| HarnessError::Malformed {
        path: path.to_path_buf(),
        msg,
    };
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new().from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let classifier = match headers.iter().collect::<Vec<_>>().as_slice() {
        ["step", "train_loss", "val_loss"] => false,
        ["step", "train_loss", "val_loss", "val_f1"] => true,
        other => return Err(malformed(format!("unexpected header {other:?}"))),
    };
    let parse = |s: &str, what: &str, line: u64| -> Result<Option<f64>, HarnessError> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| malformed(format!("line {line}: bad {what} `{s}`")))
    };
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut run = ParsedRun {
        label,
        classifier,
        train_loss: Vec::new(),
        val: Vec::new(),
    };
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let step: usize = row[0]
            .parse()
            .map_err(|_| malformed(format!("line {line}: bad step `{}`", &row[0])))?;
        if let Some(l) = parse(&row[1], "train_loss", line)? {
            if step != run.train_loss.len() {
                return Err(malformed(format!(
                    "line {line}: train loss for step {step} out of sequence"
                )));
            }
            run.train_loss.push(l);
        }
        if let Some(loss) = parse(&row[2], "val_loss", line)? {
            let f1 = if classifier {
                parse(&row[3], "val_f1", line)?
            } else {
                None
            };
            run.val.push(ValPoint { step, loss, f1 });
        }
    }
    Ok(run)
}

/// Statistics for every pooling choice, plus the formatted table rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub runs: usize,
    pub series: Option<SummaryStats>,
    pub final_val_loss: Option<SummaryStats>,
    pub best_val_loss: Option<SummaryStats>,
    pub table_rows: BTreeMap<String, String>,
}

impl SweepStats {
    pub fn get(&self, field: SummaryField) -> Option<&SummaryStats> {
        match field {
            SummaryField::Series => self.series.as_ref(),
            SummaryField::FinalValLoss => self.final_val_loss.as_ref(),
            SummaryField::BestValLoss => self.best_val_loss.as_ref(),
        }
    }
}

fn sweep_stats(runs: &[ParsedRun]) -> SweepStats {
    let series: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.val.iter().map(|v| v.loss))
        .collect();
    let finals: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.val.last().map(|v| v.loss))
        .collect();
    let bests: Vec<f64> = runs
        .iter()
        .filter_map(|r| {
            r.val
                .iter()
                .map(|v| v.loss)
                .filter(|x| x.is_finite())
                .reduce(f64::min)
        })
        .collect();
    let mut stats = SweepStats {
        runs: runs.len(),
        series: summarize(&series).ok(),
        final_val_loss: summarize(&finals).ok(),
        best_val_loss: summarize(&bests).ok(),
        table_rows: BTreeMap::new(),
    };
    for (key, s) in [
        ("series", stats.series),
        ("final_val_loss", stats.final_val_loss),
        ("best_val_loss", stats.best_val_loss),
    ] {
        if let Some(s) = s {
            stats
                .table_rows
                .insert(key.to_string(), format_table_row(&s));
        }
    }
    stats
}

fn plots(runs: &[ParsedRun]) -> (String, String) {
    let series: Vec<(String, Vec<(f64, f64)>)> = runs
        .iter()
        .map(|r| {
            let pts = r
                .train_loss
                .iter()
                .enumerate()
                .map(|(s, &l)| (s as f64, l))
                .collect();
            (r.label.clone(), pts)
        })
        .collect();
    let finals: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.val.last().map(|v| v.loss))
        .collect();
    (
        svg::loss_curves("training loss per run", &series),
        svg::histogram("final validation loss", &finals, HIST_BINS),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub csv: String,
    pub config: RunCell,
    pub final_loss: Option<f64>,
    pub best_loss: Option<f64>,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
    pub error: Option<String>,
    pub seconds: Option<f64>,
    pub digest: String,
    pub sparse_steps: usize,
    pub dense_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lr1: Vec<f64>,
    pub lr2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    /// Hash of the result-affecting configuration.
    pub sweep_id: String,
    pub name: String,
    pub optimizer: String,
    pub objective: String,
    pub grid: Grid,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub pooling: SummaryField,
    pub per_run: Vec<RunSummary>,
    /// Statistics under the configured pooling.
    pub stats: Option<SummaryStats>,
    pub table_row: Option<String>,
    /// The same content [`report`] writes to `stats.json`.
    pub stats_by_field: SweepStats,
}

fn sweep_id(cfg: &ExperimentConfig) -> Result<String, HarnessError> {
    let mut c = cfg.clone();
    c.out_dir = PathBuf::new();
    c.jobs = 1;
    let bytes = serde_json::to_vec(&c)?;
    Ok(hex::encode(Sha256::digest(&bytes))[..16].to_string())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, HarnessError> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Writes one CSV per record, `summary.json` and the two SVG plots into
/// `dir`, creating it if needed.
pub fn export(
    cfg: &ExperimentConfig,
    records: &[RunRecord],
    dir: &Path,
) -> Result<SweepSummary, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut per_run = Vec::with_capacity(records.len());
    for rec in records {
        let name = run_csv_name(rec);
        let path = dir.join(&name);
        let mut buf = Vec::new();
        write_run_csv(rec, &mut buf).map_err(|e| HarnessError::io(&path, e))?;
        write_file(&path, &buf)?;
        per_run.push(RunSummary {
            csv: name,
            config: rec.cell,
            final_loss: rec.final_loss(),
            best_loss: rec.best_loss(),
            diverged: rec.diverged,
            diverged_at: rec.diverged_at,
            error: rec.error.clone(),
            seconds: rec.seconds,
            digest: rec.digest.clone(),
            sparse_steps: rec.sparse_steps,
            dense_steps: rec.dense_steps,
        });
    }
    let parsed: Vec<ParsedRun> = records.iter().map(ParsedRun::from_record).collect();
    let by_field = sweep_stats(&parsed);
    let stats = by_field.get(cfg.pooling).copied();
    let summary = SweepSummary {
        sweep_id: sweep_id(cfg)?,
        name: cfg.name.clone(),
        optimizer: cfg.optimizer.name().to_string(),
        objective: cfg.objective.name().to_string(),
        grid: Grid {
            lr1: cfg.lr_grid.clone(),
            lr2: cfg
                .lr2_grid
                .clone()
                .filter(|_| cfg.optimizer.baseline().is_none()),
        },
        seeds: cfg.seed_list(),
        steps: cfg.steps,
        pooling: cfg.pooling,
        per_run,
        table_row: stats.as_ref().map(format_table_row),
        stats,
        stats_by_field: by_field,
    };
    write_file(&dir.join(SUMMARY_FILE), &to_json(&summary)?)?;
    let (curves, hist) = plots(&parsed);
    write_file(&dir.join(CURVES_FILE), curves.as_bytes())?;
    write_file(&dir.join(HISTOGRAM_FILE), hist.as_bytes())?;
    Ok(summary)
}

/// Rebuilds `stats.json` and both plots from the run CSVs in `dir`.
pub fn report(dir: &Path) -> Result<SweepStats, HarnessError> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| HarnessError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if is_run_csv(&name) {
            names.push(name);
        }
    }
    if names.is_empty() {
        return Err(HarnessError::Malformed {
            path: dir.to_path_buf(),
            msg: "no run CSVs found".into(),
        });
    }
    names.sort();
    let runs = names
        .iter()
        .map(|n| read_run_csv(&dir.join(n)))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = sweep_stats(&runs);
    write_file(&dir.join(STATS_FILE), &to_json(&stats)?)?;
    let (curves, hist) = plots(&runs);
    write_file(&dir.join(CURVES_FILE), curves.as_bytes())?;
    write_file(&dir.join(HISTOGRAM_FILE), hist.as_bytes())?;
    Ok(stats)
}
