//! Error covariance operators and the observation system.

mod correlation;
mod obs;

pub use correlation::{Correlation, CorrelationKind, Covariance, CovarianceConfig, EIGEN_FLOOR};
pub use obs::{simulate_observations, ObsBatch, ObsLocation, ObsNetwork, ObsOperator, WindowObservations};
