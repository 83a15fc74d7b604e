use super::dataset::TrainingPair;
use crate::error::{check_len, Error, Result};
use crate::nn::ColumnCorrector;
use crate::qg::Grid;

/// `MSE(prediction, target) / MSE(0, target)` in physical units.
pub fn evaluate_normalized_mse(corr: &ColumnCorrector, grid: Grid, pairs: &[TrainingPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Insufficient("empty test set".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for p in pairs {
        check_len("test target", grid.len(), p.target.len())?;
        let pred = corr.apply(grid, &p.input)?;
        for (a, t) in pred.iter().zip(&p.target) {
            num += (a - t) * (a - t);
            den += t * t;
        }
    }
    if den == 0.0 {
        return Err(Error::Insufficient("test targets are all zero".into()));
    }
    Ok(num / den)
}
