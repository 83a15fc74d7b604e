//! Variational data assimilation on a two-layer quasi-geostrophic channel,
//! with strong-constraint, weak-constraint (forcing) and neural-network
//! corrected 4D-Var, offline training from analysis increments and a twin
//! experiment harness.

pub mod cli;
pub mod cov;
pub mod error;
pub mod experiments;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod qg;
pub mod training;
pub mod util;
pub mod var;

pub use error::{Error, Result};
