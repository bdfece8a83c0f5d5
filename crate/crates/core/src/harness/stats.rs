use serde::{Deserialize, Serialize};

use super::config::SummaryField;
use super::run::RunRecord;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    /// Finite values that went into the statistics.
    pub count: usize,
}

/// Order statistics, mean and population standard deviation of the finite
/// entries of `values`. Even counts take the midpoint of the two middle
/// values as the median.
pub fn summarize(values: &[f64]) -> Result<SummaryStats, HarnessError> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    // Rounding in the sum can push the mean a hair outside the data range.
    let mean = (v.iter().sum::<f64>() / n as f64).clamp(v[0], v[n - 1]);
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(SummaryStats {
        median,
        mean,
        std: var.sqrt(),
        min: v[0],
        count: n,
    })
}

/// Pools the chosen losses across records. Diverged runs are included;
/// records that failed outright contribute nothing.
pub fn summarize_records(
    records: &[RunRecord],
    field: SummaryField,
) -> Result<SummaryStats, HarnessError> {
    let values: Vec<f64> = match field {
        SummaryField::FinalValLoss => records.iter().filter_map(RunRecord::final_loss).collect(),
        SummaryField::BestValLoss => records.iter().filter_map(RunRecord::best_loss).collect(),
        SummaryField::Series => records
            .iter()
            .flat_map(|r| r.val.iter().map(|v| v.loss))
            .collect(),
    };
    summarize(&values)
}

/// Two decimals with comma thousands separators, e.g. `3,833.71`.
fn grouped(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.2}", x.abs());
    let (int, frac) = s
        .split_once('.')
        .expect("two decimals always print a point");
    let mut out = String::with_capacity(s.len() + int.len() / 3 + 1);
    if x < 0.0 && s.bytes().any(|b| b != b'0' && b != b'.') {
        out.push('-');
    }
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out.push('.');
    out.push_str(frac);
    out
}

/// `median / mean / std / min`, the layout of a validation-loss table row.
pub fn format_table_row(s: &SummaryStats) -> String {
    format!(
        "{} / {} / {} / {}",
        grouped(s.median),
        grouped(s.mean),
        grouped(s.std),
        grouped(s.min)
    )
}
