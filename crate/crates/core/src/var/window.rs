use serde::{Deserialize, Serialize};

use crate::cov::{ObsNetwork, WindowObservations};
use crate::error::{Error, Result};

/// Timing of one assimilation window on the model step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub start_seconds: f64,
    pub length_seconds: f64,
    pub interval_seconds: f64,
    pub dt_seconds: f64,
    pub n_steps: usize,
    /// Seconds after the start of each observation batch.
    pub batch_offsets: Vec<f64>,
    /// Model step at which each batch is valid.
    pub obs_steps: Vec<usize>,
}

fn whole_steps(seconds: f64, dt: f64) -> Result<usize> {
    let n = seconds / dt;
    let r = n.round();
    if (n - r).abs() > 1e-9 || r < 0.0 {
        return Err(Error::StepCount { seconds, dt });
    }
    Ok(r as usize)
}

impl Window {
    pub fn new(start_seconds: f64, net: &ObsNetwork, dt_seconds: f64) -> Result<Self> {
        if !(dt_seconds > 0.0) {
            return Err(Error::Config(format!("model step must be positive, got {dt_seconds}")));
        }
        whole_steps(net.interval_seconds, dt_seconds)?;
        let n_steps = whole_steps(net.window_seconds, dt_seconds)?;
        let batch_offsets = net.batch_offsets();
        let obs_steps = batch_offsets.iter().map(|o| whole_steps(*o, dt_seconds)).collect::<Result<Vec<_>>>()?;
        if obs_steps.iter().any(|s| *s > n_steps) {
            return Err(Error::Config("observation batch after the end of the window".into()));
        }
        Ok(Self {
            start_seconds,
            length_seconds: net.window_seconds,
            interval_seconds: net.interval_seconds,
            dt_seconds,
            n_steps,
            batch_offsets,
            obs_steps,
        })
    }

    /// The following window.
    pub fn next(&self) -> Self {
        Self { start_seconds: self.start_seconds + self.length_seconds, ..self.clone() }
    }

    pub fn end_seconds(&self) -> f64 {
        self.start_seconds + self.length_seconds
    }

    /// Last step that carries observations; the linear sweeps stop there.
    pub fn last_obs_step(&self) -> usize {
        self.obs_steps.iter().copied().max().unwrap_or(0)
    }

    pub fn check_obs(&self, obs: &WindowObservations, n_loc: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::Data { path: "observations".into(), reason });
        if (obs.start_seconds - self.start_seconds).abs() > 1e-6 {
            return bad(format!("window starts at {} s, observations at {} s", self.start_seconds, obs.start_seconds));
        }
        if obs.batches.len() != self.batch_offsets.len() {
            return bad(format!("expected {} batches, got {}", self.batch_offsets.len(), obs.batches.len()));
        }
        for (b, off) in obs.batches.iter().zip(&self.batch_offsets) {
            if (b.offset_seconds - off).abs() > 1e-6 {
                return bad(format!("batch at +{} s, expected +{off} s", b.offset_seconds));
            }
            if b.values.len() != n_loc {
                return bad(format!("batch at +{off} s has {} values, expected {n_loc}", b.values.len()));
            }
            if !(b.r > 0.0 && b.r.is_finite()) {
                return bad(format!("batch at +{off} s has observation std {}", b.r));
            }
        }
        Ok(())
    }
}

/// Outer/inner loop budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizerConfig {
    pub n_outer: usize,
    pub n_inner: usize,
    pub cg_tol: f64,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self { n_outer: 2, n_inner: 40, cg_tol: 1e-3 }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_outer == 0 || self.n_inner == 0 || !(self.cg_tol > 0.0 && self.cg_tol.is_finite()) {
            return Err(Error::Config(format!("minimizer budgets must be positive, got {self:?}")));
        }
        Ok(())
    }
}
