//! Delimiter-separated result tables. Floats carry 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use super::aggregate::{CycleRow, VariantSummary};
use super::forecast::ForecastRecord;
use crate::error::{Error, Result};

pub const CYCLE_HEADER: &str = "cycle,fg_rmse,an_rmse,cost_total,inner_iters";
pub const FORECAST_HEADER: &str = "launch_cycle,lead_hours,rmse";
pub const SUMMARY_HEADER: &str = "variant,repetitions,fg_rmse_mean,fg_rmse_std,an_rmse_mean,an_rmse_std";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn cycle_table(rows: &[CycleRow]) -> String {
    let mut s = format!("{CYCLE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.cycle,
            fmt_f64(r.fg_rmse),
            fmt_f64(r.an_rmse),
            fmt_f64(r.cost_total),
            r.inner_iters
        );
    }
    s
}

pub fn forecast_table(records: &[ForecastRecord]) -> String {
    let mut s = format!("{FORECAST_HEADER}\n");
    for r in records {
        for (k, v) in r.rmse.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", r.launch_cycle, r.lead_hours(k), fmt_f64(*v));
        }
    }
    s
}

pub fn summary_table(rows: &[VariantSummary]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.variant,
            r.repetitions,
            fmt_f64(r.fg_mean),
            fmt_f64(r.fg_std),
            fmt_f64(r.an_mean),
            fmt_f64(r.an_std)
        );
    }
    s
}

/// `lead_hours,<name>...` with one mean-RMSE column per series.
pub fn lead_table(lead_hours: &[f64], columns: &[(&str, Vec<f64>)]) -> String {
    let mut s = String::from("lead_hours");
    for (n, _) in columns {
        s += ",";
        s += n;
    }
    s += "\n";
    for (k, h) in lead_hours.iter().enumerate() {
        s += &h.to_string();
        for (_, c) in columns {
            s += ",";
            s += &fmt_f64(c[k]);
        }
        s += "\n";
    }
    s
}

fn rows<'a>(text: &'a str, header: &str, path: &Path) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        _ => return Err(Error::data(path, format!("expected header `{header}`"))),
    }
    let width = header.split(',').count();
    let out: Vec<(usize, Vec<&str>)> = lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| (n + 2, l.split(',').map(str::trim).collect::<Vec<_>>()))
        .collect();
    if let Some((n, _)) = out.iter().find(|(_, f)| f.len() != width) {
        return Err(Error::data(path, format!("line {n}: expected {width} fields")));
    }
    Ok(out.into_iter())
}

fn field<T: std::str::FromStr>(f: &str, line: usize, what: &str, path: &Path) -> Result<T> {
    f.parse().map_err(|_| Error::data(path, format!("line {line}: bad {what} `{f}`")))
}

pub fn parse_cycle_table(text: &str, path: &Path) -> Result<Vec<CycleRow>> {
    rows(text, CYCLE_HEADER, path)?
        .map(|(n, f)| {
            Ok(CycleRow {
                cycle: field(f[0], n, "cycle", path)?,
                fg_rmse: field(f[1], n, "fg_rmse", path)?,
                an_rmse: field(f[2], n, "an_rmse", path)?,
                cost_total: field(f[3], n, "cost_total", path)?,
                inner_iters: field(f[4], n, "inner_iters", path)?,
            })
        })
        .collect()
}

/// Groups consecutive lines by launch cycle; leads must start at zero and be evenly spaced.
pub fn parse_forecast_table(text: &str, path: &Path) -> Result<Vec<ForecastRecord>> {
    let mut out: Vec<ForecastRecord> = Vec::new();
    for (n, f) in rows(text, FORECAST_HEADER, path)? {
        let launch: usize = field(f[0], n, "launch_cycle", path)?;
        let lead: f64 = field(f[1], n, "lead_hours", path)?;
        let v: f64 = field(f[2], n, "rmse", path)?;
        match out.last_mut() {
            Some(r) if r.launch_cycle == launch => {
                if r.rmse.len() == 1 {
                    r.sample_seconds = lead * 3600.0;
                }
                if (r.lead_hours(r.rmse.len()) - lead).abs() > 1e-9 * lead.max(1.0) {
                    return Err(Error::data(path, format!("line {n}: uneven lead time {lead}")));
                }
                r.rmse.push(v);
            }
            _ => {
                if lead != 0.0 {
                    return Err(Error::data(path, format!("line {n}: forecast must start at lead 0")));
                }
                out.push(ForecastRecord { launch_cycle: launch, sample_seconds: 3600.0, rmse: vec![v] });
            }
        }
    }
    Ok(out)
}
