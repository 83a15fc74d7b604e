//! Strong-constraint, weak-constraint and NN 4D-Var over one window, with the
//! incremental minimiser and cycling.

mod control;
mod cost;
mod incremental;
mod minimize;
mod window;

pub use control::{Background, ControlVector, Variant};
pub use cost::{cost, cost_nn, cost_sc, cost_wc, window_trajectory, CostReport, DaContext};
pub use incremental::{
    gradient_incremental_nn, ForcingMap, IdentityForcing, Linearization, NetForcing, StateForcing, Unforced,
};
pub use minimize::{cycle, inner_solve, outer_loop, Analysis, CgDiagnostics, InnerResult, OuterDiagnostics};
pub use window::{MinimizerConfig, Window};

#[cfg(test)]
mod tests;
