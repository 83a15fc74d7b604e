use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::plan::TruthConfig;
use crate::cov::{simulate_observations, ObsNetwork, WindowObservations};
use crate::error::{Error, Result};
use crate::qg::{QgModel, QgState};
use crate::util::mix_seed;

/// Truth trajectory stored every `sample_seconds`, starting at time zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub sample_seconds: f64,
    pub window_seconds: f64,
    pub states: Vec<QgState>,
}

impl Truth {
    pub fn samples_per_window(&self) -> usize {
        (self.window_seconds / self.sample_seconds).round() as usize
    }

    /// Number of complete windows covered.
    pub fn n_windows(&self) -> usize {
        (self.states.len() - 1) / self.samples_per_window()
    }

    pub fn at_time(&self, t: f64) -> Result<&QgState> {
        let k = t / self.sample_seconds;
        if k < -1e-9 || (k - k.round()).abs() > 1e-6 {
            return Err(Error::Config(format!("truth is stored every {} s, not at {t} s", self.sample_seconds)));
        }
        self.states.get(k.round() as usize).ok_or_else(|| {
            Error::Insufficient(format!("truth ends at {} s, state at {t} s requested", self.end_seconds()))
        })
    }

    pub fn end_seconds(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.sample_seconds
    }

    pub fn window_start(&self, cycle: usize) -> Result<&QgState> {
        self.at_time(cycle as f64 * self.window_seconds)
    }

    /// The samples of window `cycle`, its end excluded.
    pub fn window_samples(&self, cycle: usize) -> Result<&[QgState]> {
        let n = self.samples_per_window();
        let a = cycle * n;
        if a + n > self.states.len() {
            return Err(Error::Insufficient(format!(
                "truth covers {} windows, window {cycle} requested",
                self.n_windows()
            )));
        }
        Ok(&self.states[a..a + n])
    }

    /// States at each window start, `cycles.end` included.
    pub fn window_starts(&self, cycles: Range<usize>) -> Result<Vec<QgState>> {
        (cycles.start..=cycles.end).map(|c| self.window_start(c).cloned()).collect()
    }
}

fn check_finite(s: &QgState, day: usize) -> Result<()> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { cycle: day, reason: "non-finite truth state".into() })
    }
}

/// Jet, relaxation, seeded perturbation, second relaxation, then `days`
/// windows of truth. `days == 0` returns the initial condition alone.
pub fn run_truth(model: &QgModel, cfg: &TruthConfig, seed: u64, days: usize) -> Result<Truth> {
    cfg.validate()?;
    let per_sample = model.config().steps_in(cfg.sample_seconds)?;
    let per_window = model.config().steps_in(cfg.window_seconds)?;
    let mut x = model.jet_state();
    for d in 0..cfg.relax_days {
        x = model.integrate(&x, per_window, None)?;
        check_finite(&x, d)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x7275]));
    for v in x.psi.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += cfg.perturbation_std * e;
    }
    for d in 0..cfg.relax_days {
        x = model.integrate(&x, per_window, None)?;
        check_finite(&x, cfg.relax_days + d)?;
    }
    x.valid_time = 0.0;
    let spw = cfg.samples_per_window();
    let mut states = Vec::with_capacity(days * spw + 1);
    states.push(x.clone());
    for k in 0..days * spw {
        x = model.integrate(&x, per_sample, None)?;
        x.valid_time = (k + 1) as f64 * cfg.sample_seconds;
        check_finite(&x, k / spw)?;
        states.push(x.clone());
    }
    Ok(Truth { sample_seconds: cfg.sample_seconds, window_seconds: cfg.window_seconds, states })
}

/// Simulated observations for a range of truth windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsArchive {
    pub first_cycle: usize,
    pub windows: Vec<WindowObservations>,
}

impl ObsArchive {
    pub fn window(&self, cycle: usize) -> Result<&WindowObservations> {
        cycle
            .checked_sub(self.first_cycle)
            .and_then(|k| self.windows.get(k))
            .ok_or_else(|| Error::Insufficient(format!("no observations for window {cycle}")))
    }

    pub fn cycles(&self) -> Range<usize> {
        self.first_cycle..self.first_cycle + self.windows.len()
    }
}

/// Observations of every window in `cycles`, with noise seeded per window.
pub fn simulate_archive(
    truth: &Truth,
    net: &ObsNetwork,
    r: f64,
    seed: u64,
    cycles: Range<usize>,
) -> Result<ObsArchive> {
    if (net.window_seconds - truth.window_seconds).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "network window {} s differs from truth window {} s",
            net.window_seconds, truth.window_seconds
        )));
    }
    let offsets = net.batch_offsets();
    let windows = cycles
        .clone()
        .map(|c| {
            let start = c as f64 * truth.window_seconds;
            let states: Vec<QgState> =
                offsets.iter().map(|o| truth.at_time(start + o).cloned()).collect::<Result<_>>()?;
            simulate_observations(&states, net, start, r, mix_seed(&[seed, c as u64, 0x6f62]))
        })
        .collect::<Result<_>>()?;
    Ok(ObsArchive { first_cycle: cycles.start, windows })
}
