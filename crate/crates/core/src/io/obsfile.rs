//! Observation tables: one line per value, `time,id,layer,value,std`, with
//! ISO-8601 timestamps counted from a fixed epoch.

use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Utc};

use crate::cov::{ObsBatch, ObsNetwork, WindowObservations};
use crate::error::{Error, Result};

pub const OBS_HEADER: &str = "time,id,layer,value,std";

fn epoch() -> DateTime<Utc> {
    NaiveDate::from_ymd_opt(2000, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap().and_utc()
}

fn stamp(seconds: f64) -> String {
    let t = epoch() + Duration::milliseconds((seconds * 1000.0).round() as i64);
    t.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

fn seconds_of(s: &str) -> Option<f64> {
    let t = DateTime::parse_from_rfc3339(s).ok()?.with_timezone(&Utc);
    Some((t - epoch()).num_milliseconds() as f64 / 1000.0)
}

pub fn write_observations(obs: &WindowObservations, net: &ObsNetwork) -> String {
    let mut s = format!("{OBS_HEADER}\n");
    for b in &obs.batches {
        let t = stamp(obs.start_seconds + b.offset_seconds);
        for (loc, v) in net.locations.iter().zip(&b.values) {
            let _ = writeln!(s, "{t},{},{},{:.16e},{:.16e}", loc.id, loc.layer, v, b.r);
        }
    }
    s
}

/// Rebuild a window's batches; values must follow the network order in every batch.
pub fn parse_observations(text: &str, net: &ObsNetwork, start_seconds: f64, path: &Path) -> Result<WindowObservations> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(OBS_HEADER) {
        return Err(Error::data(path, format!("expected header `{OBS_HEADER}`")));
    }
    let mut batches: Vec<ObsBatch> = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |what: &str| Error::data(path, format!("line {}: bad {what}", n + 2));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad("field count"));
        }
        let off = seconds_of(f[0]).ok_or_else(|| bad("timestamp"))? - start_seconds;
        let id: usize = f[1].parse().map_err(|_| bad("id"))?;
        let layer: usize = f[2].parse().map_err(|_| bad("layer"))?;
        let v: f64 = f[3].parse().map_err(|_| bad("value"))?;
        let r: f64 = f[4].parse().map_err(|_| bad("std"))?;
        let b = match batches.last_mut() {
            Some(b) if (b.offset_seconds - off).abs() < 1e-3 => b,
            _ => {
                batches.push(ObsBatch { offset_seconds: off, values: Vec::new(), r });
                batches.last_mut().unwrap()
            }
        };
        let loc = net.locations.get(b.values.len()).ok_or_else(|| bad("location count"))?;
        if loc.id != id || loc.layer != layer {
            return Err(bad("location order"));
        }
        if b.r != r {
            return Err(bad("std within batch"));
        }
        b.values.push(v);
    }
    Ok(WindowObservations { start_seconds, batches })
}
