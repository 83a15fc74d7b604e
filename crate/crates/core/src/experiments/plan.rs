use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::var::Variant;

/// The five assimilation setups compared in the twin experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantKind {
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "WC")]
    Wc,
    /// Strong constraint with a net trained on true model error.
    #[serde(rename = "SC-NNt")]
    ScNnt,
    /// Strong constraint with a net trained on analysis increments.
    #[serde(rename = "SC-NNa")]
    ScNna,
    /// Online learning of the net weights.
    #[serde(rename = "NN")]
    Nn,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] = [Self::Sc, Self::Wc, Self::ScNnt, Self::ScNna, Self::Nn];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sc => "SC",
            Self::Wc => "WC",
            Self::ScNnt => "SC-NNt",
            Self::ScNna => "SC-NNa",
            Self::Nn => "NN",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }

    /// Control-vector layout used by the minimiser.
    pub fn da_variant(self) -> Variant {
        match self {
            Self::Sc | Self::ScNnt | Self::ScNna => Variant::Sc,
            Self::Wc => Variant::Wc,
            Self::Nn => Variant::Nn,
        }
    }

    pub fn uses_net(self) -> bool {
        matches!(self, Self::ScNnt | Self::ScNna | Self::Nn)
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the net correction evolves along a forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdatePolicy {
    /// Re-evaluated from the forecast state at every window boundary.
    #[default]
    Daily,
    /// Evaluated once from the launch analysis.
    Frozen,
}

/// Cycle bookkeeping for one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub variant: VariantKind,
    pub total_cycles: usize,
    pub spin_up: usize,
    pub repetitions: usize,
    /// Truth window at which repetition 0 starts.
    #[serde(default)]
    pub first_cycle: usize,
    /// Truth windows between the starts of consecutive repetitions.
    #[serde(default = "default_stride")]
    pub rep_stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_days")]
    pub forecast_days: usize,
    #[serde(default)]
    pub policy: UpdatePolicy,
}

fn default_stride() -> usize {
    8
}

fn default_days() -> usize {
    32
}

impl ExperimentPlan {
    pub fn new(variant: VariantKind, total_cycles: usize, spin_up: usize, repetitions: usize) -> Self {
        Self {
            variant,
            total_cycles,
            spin_up,
            repetitions,
            first_cycle: 0,
            rep_stride: default_stride(),
            seed: 0,
            forecast_days: default_days(),
            policy: UpdatePolicy::Daily,
        }
    }

    /// `spin_up == total_cycles` is accepted and yields no kept cycles.
    pub fn validate(&self) -> Result<()> {
        if self.total_cycles == 0 {
            return Err(Error::Config("plan.total_cycles must be positive".into()));
        }
        if self.spin_up > self.total_cycles {
            return Err(Error::Config(format!(
                "plan.spin_up ({}) exceeds plan.total_cycles ({})",
                self.spin_up, self.total_cycles
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("plan.repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        self.total_cycles - self.spin_up
    }

    /// Truth window of DA cycle `cycle` in repetition `rep`.
    pub fn truth_cycle(&self, rep: usize, cycle: usize) -> usize {
        self.first_cycle + rep * self.rep_stride + cycle
    }

    /// Number of truth windows needed by all repetitions, forecasts included.
    pub fn truth_windows_needed(&self, with_forecasts: bool) -> usize {
        let extra = if with_forecasts { self.forecast_days } else { 0 };
        self.truth_cycle(self.repetitions - 1, self.total_cycles) + extra
    }
}

/// Spin-up of the truth run from the jet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    /// Length of each of the two relaxation runs, in windows.
    pub relax_days: usize,
    /// Std of the Gaussian perturbation added between the relaxation runs.
    pub perturbation_std: f64,
    /// Spacing of the stored truth states.
    pub sample_seconds: f64,
    pub window_seconds: f64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self { relax_days: 256, perturbation_std: 1e-2, sample_seconds: 3600.0, window_seconds: 86400.0 }
    }
}

impl TruthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perturbation_std >= 0.0 && self.perturbation_std.is_finite()) {
            return Err(Error::Config("truth.perturbation_std must be non-negative".into()));
        }
        if !(self.sample_seconds > 0.0 && self.window_seconds > 0.0) {
            return Err(Error::Config("truth sample and window lengths must be positive".into()));
        }
        let r = self.window_seconds / self.sample_seconds;
        if (r - r.round()).abs() > 1e-9 {
            return Err(Error::Config("truth.window_seconds must be a multiple of truth.sample_seconds".into()));
        }
        Ok(())
    }

    pub fn samples_per_window(&self) -> usize {
        (self.window_seconds / self.sample_seconds).round() as usize
    }
}
