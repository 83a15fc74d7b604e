use crate::nn::WeightVector;
use crate::qg::QgState;
use crate::var::CostReport;

/// Per-cycle output of a cycled assimilation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Background and analysis at the window start.
    pub background: QgState,
    pub analysis: QgState,
    pub w: Option<Vec<f64>>,
    pub p: Option<WeightVector>,
    /// RMSE against the truth averaged over the hourly states of the window.
    pub fg_rmse: f64,
    pub an_rmse: f64,
    pub cost: CostReport,
    pub inner_iters: usize,
    /// Set on the record that tripped the divergence guard.
    pub diverged: bool,
}

impl CycleRecord {
    pub fn new(cycle: usize, background: QgState, analysis: QgState) -> Self {
        Self {
            cycle,
            background,
            analysis,
            w: None,
            p: None,
            fg_rmse: 0.0,
            an_rmse: 0.0,
            cost: CostReport::default(),
            inner_iters: 0,
            diverged: false,
        }
    }
}
