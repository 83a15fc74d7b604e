use crate::error::{check_len, Error, Result};
use crate::experiments::CycleRecord;
use crate::nn::{column_predictors, Normalization, N_OUTPUTS, N_PREDICTORS};
use crate::qg::{Grid, QgModel, QgState};

/// One full-grid input/target pair; every column is a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub cycle: usize,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// `δt / ΔT`: spreads a one-window increment evenly over the model steps.
pub fn increment_scaling(dt_seconds: f64, window_seconds: f64) -> f64 {
    dt_seconds / window_seconds
}

/// Chronological pairs with a 7/8 training split and training-only standardisation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub grid: Grid,
    pub pairs: Vec<TrainingPair>,
    /// Number of leading pairs used for training; the rest validate.
    pub n_train: usize,
    pub norm: Normalization,
}

/// Column samples of `pairs`, raw.
pub fn column_samples(grid: Grid, pairs: &[TrainingPair]) -> Result<(Vec<[f64; N_PREDICTORS]>, Vec<[f64; N_OUTPUTS]>)> {
    let n = grid.layer_len();
    let mut xs = Vec::with_capacity(pairs.len() * n);
    let mut ys = Vec::with_capacity(pairs.len() * n);
    for p in pairs {
        check_len("training target", grid.len(), p.target.len())?;
        xs.extend(column_predictors(grid, &p.input)?);
        ys.extend((0..n).map(|c| [p.target[c], p.target[n + c]]));
    }
    Ok((xs, ys))
}

impl Dataset {
    pub fn from_pairs(grid: Grid, mut pairs: Vec<TrainingPair>) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::Insufficient(format!("need at least 2 training pairs, got {}", pairs.len())));
        }
        pairs.sort_by_key(|p| p.cycle);
        if pairs.iter().flat_map(|p| p.target.iter().chain(&p.input)).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training pairs".into()));
        }
        let n_train = (7 * pairs.len() / 8).max(1).min(pairs.len() - 1);
        let (xs, ys) = column_samples(grid, &pairs[..n_train])?;
        let norm = Normalization::fit(&xs, &ys)?;
        Ok(Self { grid, pairs, n_train, norm })
    }

    pub fn train_pairs(&self) -> &[TrainingPair] {
        &self.pairs[..self.n_train]
    }

    pub fn validation_pairs(&self) -> &[TrainingPair] {
        &self.pairs[self.n_train..]
    }

    /// Standardised column samples of a slice of pairs.
    pub fn normalized(&self, pairs: &[TrainingPair]) -> Result<(Vec<[f64; N_PREDICTORS]>, Vec<[f64; N_OUTPUTS]>)> {
        let (xs, ys) = column_samples(self.grid, pairs)?;
        Ok((
            xs.iter().map(|x| self.norm.normalize_input(x)).collect(),
            ys.iter().map(|y| self.norm.normalize_target(y)).collect(),
        ))
    }
}

/// Analysis-increment pairs: input `xᵃ(t)`, target `scaling · (xᵃ(t+1) - xᵇ(t+1))`.
///
/// Uses the first `n_pairs + 1` records after sorting by cycle; they must be consecutive.
pub fn build_dataset(records: &[CycleRecord], n_pairs: usize, scaling: f64) -> Result<Dataset> {
    let mut recs: Vec<&CycleRecord> = records.iter().collect();
    recs.sort_by_key(|r| r.cycle);
    if recs.len() < n_pairs + 1 {
        return Err(Error::Insufficient(format!(
            "{n_pairs} pairs need {} cycle records, got {}",
            n_pairs + 1,
            recs.len()
        )));
    }
    let recs = &recs[..n_pairs + 1];
    if recs.windows(2).any(|w| w[1].cycle != w[0].cycle + 1) {
        return Err(Error::Insufficient("cycle records are not consecutive".into()));
    }
    let grid = recs[0].analysis.grid;
    let pairs = recs
        .windows(2)
        .map(|w| TrainingPair {
            cycle: w[0].cycle,
            input: w[0].analysis.psi.clone(),
            target: w[1].analysis.psi.iter().zip(&w[1].background.psi).map(|(a, b)| scaling * (a - b)).collect(),
        })
        .collect();
    Dataset::from_pairs(grid, pairs)
}

/// Model-error pairs along a truth trajectory sampled at window starts:
/// input `xᵗ(t)`, target `scaling · (xᵗ(t+1) - M(xᵗ(t)))` with `M` the
/// assimilating model over one window.
pub fn truth_pairs(
    model: &QgModel,
    truth: &[QgState],
    first_cycle: usize,
    steps: usize,
    scaling: f64,
) -> Result<Vec<TrainingPair>> {
    truth
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let f = model.integrate(&w[0], steps, None)?;
            Ok(TrainingPair {
                cycle: first_cycle + k,
                input: w[0].psi.clone(),
                target: w[1].psi.iter().zip(&f.psi).map(|(a, b)| scaling * (a - b)).collect(),
            })
        })
        .collect()
}
