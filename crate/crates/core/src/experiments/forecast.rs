use super::cycled::DaSetup;
use super::plan::{ExperimentPlan, UpdatePolicy, VariantKind};
use super::record::CycleRecord;
use super::truth::Truth;
use crate::error::{Error, Result};
use crate::qg::QgState;

/// RMSE against the truth at every stored sample of a forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub launch_cycle: usize,
    pub sample_seconds: f64,
    /// `rmse[k]` at lead `k * sample_seconds`; `days * samples_per_day + 1` values.
    pub rmse: Vec<f64>,
}

impl ForecastRecord {
    pub fn lead_hours(&self, k: usize) -> f64 {
        k as f64 * self.sample_seconds / 3600.0
    }

    /// Mean over the samples of forecast day `day` (0-based), end excluded.
    pub fn day_mean(&self, day: usize, samples_per_day: usize) -> Option<f64> {
        let s = self.rmse.get(day * samples_per_day..(day + 1) * samples_per_day)?;
        Some(s.iter().sum::<f64>() / s.len() as f64)
    }
}

/// Forcing applied during one forecast window.
fn forcing(setup: &DaSetup, kind: VariantKind, rec: &CycleRecord, x: &QgState) -> Result<Option<Vec<f64>>> {
    let g = setup.model.grid();
    let need = || setup.corrector.ok_or_else(|| Error::Config(format!("{kind} forecast needs trained weights")));
    Ok(match kind {
        VariantKind::Sc => None,
        VariantKind::Wc => {
            Some(rec.w.clone().ok_or_else(|| Error::Config("WC record without a forcing estimate".into()))?)
        }
        VariantKind::ScNnt | VariantKind::ScNna => Some(need()?.apply(g, &x.psi)?),
        VariantKind::Nn => {
            let p = rec.p.as_ref().ok_or_else(|| Error::Config("NN record without weights".into()))?;
            Some(need()?.apply_with(p, g, &x.psi)?)
        }
    })
}

/// Forecast from the analysis of `rec`, launched at truth window `truth_cycle`.
///
/// WC keeps the analysed `w`. Net variants evaluate the correction from the
/// forecast state at every window boundary (`Daily`) or once at launch (`Frozen`).
pub fn forecast(
    setup: &DaSetup,
    kind: VariantKind,
    policy: UpdatePolicy,
    rec: &CycleRecord,
    truth_cycle: usize,
    truth: &Truth,
    days: usize,
) -> Result<ForecastRecord> {
    let stride = setup.model.config().steps_in(truth.sample_seconds)?;
    let spw = truth.samples_per_window();
    let t0 = truth_cycle as f64 * truth.window_seconds;
    let mut x = QgState { valid_time: t0, ..rec.analysis.clone() };
    let mut rmse = Vec::with_capacity(days * spw + 1);
    rmse.push(x.rmse(truth.at_time(t0)?));
    let mut f = forcing(setup, kind, rec, &x)?;
    for d in 0..days {
        if d > 0 && policy == UpdatePolicy::Daily {
            f = forcing(setup, kind, rec, &x)?;
        }
        for _ in 0..spw {
            x = setup.model.integrate(&x, stride, f.as_deref())?;
            x.valid_time = t0 + rmse.len() as f64 * truth.sample_seconds;
            if !x.is_finite() {
                return Err(Error::Diverged {
                    cycle: truth_cycle,
                    reason: format!("{kind} forecast blew up on day {d}"),
                });
            }
            rmse.push(x.rmse(truth.at_time(x.valid_time)?));
        }
    }
    Ok(ForecastRecord { launch_cycle: rec.cycle, sample_seconds: truth.sample_seconds, rmse })
}

/// Forecasts from every kept, non-diverged analysis of one repetition.
pub fn run_forecast_suite(
    setup: &DaSetup,
    plan: &ExperimentPlan,
    rep: usize,
    records: &[CycleRecord],
    truth: &Truth,
) -> Result<Vec<ForecastRecord>> {
    records
        .iter()
        .filter(|r| r.cycle >= plan.spin_up && !r.diverged)
        .map(|r| {
            forecast(setup, plan.variant, plan.policy, r, plan.truth_cycle(rep, r.cycle), truth, plan.forecast_days)
        })
        .collect()
}
