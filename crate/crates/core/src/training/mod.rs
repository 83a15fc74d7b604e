//! Offline training of the column corrector on analysis increments or true
//! model error.

mod adam;
mod dataset;
mod evaluate;

pub use adam::{adam_fit, adam_train, mse, AdamConfig, EpochRecord, TrainingHistory};
pub use dataset::{build_dataset, column_samples, increment_scaling, truth_pairs, Dataset, TrainingPair};
pub use evaluate::evaluate_normalized_mse;

#[cfg(test)]
mod tests;
