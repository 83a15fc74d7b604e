//! Two-layer quasi-geostrophic channel model with tangent-linear and adjoint.

mod config;
mod inversion;
mod linear;
mod model;
mod state;
mod tape;

pub use config::{HillSpec, JetSpec, QgConfig};
pub use model::QgModel;
pub use state::{shift_x, Grid, OrographyField, PvField, QgState, Walls};
pub use tape::{Stencil, StepRecord, TrajectoryTape};
