use std::ops::Range;

use super::forecast::ForecastRecord;
use super::record::CycleRecord;
use crate::error::{Error, Result};
use crate::util::{mean, std_dev};

/// One line of a cycle table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRow {
    pub cycle: usize,
    pub fg_rmse: f64,
    pub an_rmse: f64,
    pub cost_total: f64,
    pub inner_iters: usize,
}

impl From<&CycleRecord> for CycleRow {
    fn from(r: &CycleRecord) -> Self {
        Self {
            cycle: r.cycle,
            fg_rmse: r.fg_rmse,
            an_rmse: r.an_rmse,
            cost_total: r.cost.total,
            inner_iters: r.inner_iters,
        }
    }
}

/// Rows of the cycles kept after spin-up.
pub fn kept_rows(records: &[CycleRecord], spin_up: usize) -> Vec<CycleRow> {
    records.iter().filter(|r| r.cycle >= spin_up).map(CycleRow::from).collect()
}

/// Time-averaged RMSEs over the repetitions, mean and sample std.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: String,
    pub repetitions: usize,
    pub fg_mean: f64,
    pub fg_std: f64,
    pub an_mean: f64,
    pub an_std: f64,
}

/// Per-repetition time averages of first-guess and analysis RMSE over `window`.
pub fn time_averages(reps: &[Vec<CycleRow>], window: Range<usize>) -> Result<Vec<(f64, f64)>> {
    if reps.is_empty() {
        return Err(Error::Insufficient("no repetitions to aggregate".into()));
    }
    reps.iter()
        .enumerate()
        .map(|(k, rows)| {
            let sel: Vec<&CycleRow> = rows.iter().filter(|r| window.contains(&r.cycle)).collect();
            if sel.is_empty() {
                return Err(Error::Insufficient(format!("repetition {k} has no cycles in {window:?}")));
            }
            let fg: Vec<f64> = sel.iter().map(|r| r.fg_rmse).collect();
            let an: Vec<f64> = sel.iter().map(|r| r.an_rmse).collect();
            Ok((mean(&fg), mean(&an)))
        })
        .collect()
}

pub fn aggregate(variant: &str, reps: &[Vec<CycleRow>], window: Range<usize>) -> Result<VariantSummary> {
    let avg = time_averages(reps, window)?;
    let fg: Vec<f64> = avg.iter().map(|a| a.0).collect();
    let an: Vec<f64> = avg.iter().map(|a| a.1).collect();
    Ok(VariantSummary {
        variant: variant.to_string(),
        repetitions: reps.len(),
        fg_mean: mean(&fg),
        fg_std: std_dev(&fg),
        an_mean: mean(&an),
        an_std: std_dev(&an),
    })
}

/// Trailing mean over up to `window` values.
pub fn running_mean(v: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    for k in 0..v.len() {
        acc += v[k];
        if k >= w {
            acc -= v[k - w];
        }
        out.push(acc / (k + 1).min(w) as f64);
    }
    out
}

/// Element-wise mean of equally long series.
pub fn mean_series(series: &[&[f64]]) -> Result<Vec<f64>> {
    let Some(first) = series.first() else {
        return Err(Error::Insufficient("no series to average".into()));
    };
    if series.iter().any(|s| s.len() != first.len()) {
        return Err(Error::Insufficient("series lengths differ".into()));
    }
    Ok((0..first.len()).map(|k| series.iter().map(|s| s[k]).sum::<f64>() / series.len() as f64).collect())
}

/// Mean forecast RMSE at each lead over all launches.
pub fn mean_forecast(records: &[ForecastRecord]) -> Result<Vec<f64>> {
    mean_series(&records.iter().map(|r| r.rmse.as_slice()).collect::<Vec<_>>())
}
