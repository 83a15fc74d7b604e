//! Twin experiments: truth, simulated observations, cycled assimilation,
//! forecasts and RMSE summaries.

mod aggregate;
mod cycled;
mod forecast;
mod plan;
mod record;
pub mod tables;
mod truth;

pub use aggregate::{
    aggregate, kept_rows, mean_forecast, mean_series, running_mean, time_averages, CycleRow, VariantSummary,
};
pub use cycled::{background_for, initial_background, run_cycled_da, window_rmse, DaRun, DaSetup};
pub use forecast::{forecast, run_forecast_suite, ForecastRecord};
pub use plan::{ExperimentPlan, TruthConfig, UpdatePolicy, VariantKind};
pub use record::CycleRecord;
pub use truth::{run_truth, simulate_archive, ObsArchive, Truth};
