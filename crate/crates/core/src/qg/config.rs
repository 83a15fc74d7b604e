use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian hill added to the bottom-layer potential vorticity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HillSpec {
    /// Peak value in nondimensional PV units.
    pub amplitude: f64,
    /// e-folding radius in grid cells.
    pub radius: f64,
}

impl Default for HillSpec {
    fn default() -> Self {
        Self { amplitude: 0.1, radius: 3.0 }
    }
}

/// Zonal jet used for the wall values and for the relaxation initial condition.
///
/// `psi_l(y) = -amplitude_l * tanh((y - y_c) / width)` with `y` in grid rows and
/// `y_c` the channel centre line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetSpec {
    pub amplitudes: [f64; 2],
    /// Width in grid rows; `None` means `ny / 10`.
    pub width: Option<f64>,
}

impl Default for JetSpec {
    fn default() -> Self {
        Self { amplitudes: [15.0, 5.0], width: None }
    }
}

/// Physical and numerical configuration of the two-layer channel model.
///
/// Layer 0 is the upper layer (depth `top_depth`), layer 1 the lower layer
/// carrying the orography.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QgConfig {
    pub nx: usize,
    pub ny: usize,
    pub top_depth: f64,
    pub bottom_depth: f64,
    pub dt_seconds: f64,
    pub f0: f64,
    pub beta: f64,
    pub reduced_gravity: f64,
    pub length_scale: f64,
    pub velocity_scale: f64,
    /// Grid spacing in metres, identical in x and y.
    pub grid_spacing: f64,
    #[serde(default)]
    pub orography: HillSpec,
    #[serde(default)]
    pub jet: JetSpec,
}

impl Default for QgConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl QgConfig {
    /// Reference (truth) setup: 6000 m / 4000 m layers, 10 min step.
    pub fn reference() -> Self {
        Self {
            nx: 40,
            ny: 20,
            top_depth: 6000.0,
            bottom_depth: 4000.0,
            dt_seconds: 600.0,
            f0: 1.0e-4,
            beta: 1.5e-11,
            reduced_gravity: 1.0,
            length_scale: 1.0e6,
            velocity_scale: 10.0,
            grid_spacing: 3.0e5,
            orography: HillSpec::default(),
            jet: JetSpec::default(),
        }
    }

    /// Perturbed (assimilating) setup: 5750 m / 4250 m layers, 20 min step.
    pub fn perturbed() -> Self {
        Self { top_depth: 5750.0, bottom_depth: 4250.0, dt_seconds: 1200.0, ..Self::reference() }
    }

    /// Same physics on a smaller grid, used by brute-force checks.
    pub fn with_grid(mut self, nx: usize, ny: usize) -> Self {
        self.nx = nx;
        self.ny = ny;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::Config(format!("grid {}x{} too small (need >= 4x4)", self.nx, self.ny)));
        }
        let positive = [
            ("top_depth", self.top_depth),
            ("bottom_depth", self.bottom_depth),
            ("dt_seconds", self.dt_seconds),
            ("reduced_gravity", self.reduced_gravity),
            ("length_scale", self.length_scale),
            ("velocity_scale", self.velocity_scale),
            ("grid_spacing", self.grid_spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let (f1, f2) = self.coupling();
        if !(f1 > 0.0 && f2 > 0.0) {
            return Err(Error::Config(format!("coupling coefficients must be positive, got {f1}, {f2}")));
        }
        if self.orography.radius <= 0.0 {
            return Err(Error::Config("orography radius must be positive".into()));
        }
        Ok(())
    }

    /// Layer coupling coefficients `F_i = f0² L² / (g' D_i)`.
    pub fn coupling(&self) -> (f64, f64) {
        let num = self.f0 * self.f0 * self.length_scale * self.length_scale / self.reduced_gravity;
        (num / self.top_depth, num / self.bottom_depth)
    }

    /// Nondimensional planetary vorticity gradient `β L² / U`.
    pub fn beta_hat(&self) -> f64 {
        self.beta * self.length_scale * self.length_scale / self.velocity_scale
    }

    /// Grid spacing in units of `length_scale`.
    pub fn dx(&self) -> f64 {
        self.grid_spacing / self.length_scale
    }

    /// Time step in units of `length_scale / velocity_scale`.
    pub fn dt_nondim(&self) -> f64 {
        self.dt_seconds * self.velocity_scale / self.length_scale
    }

    pub fn jet_width(&self) -> f64 {
        self.jet.width.unwrap_or(self.ny as f64 / 10.0)
    }

    /// Number of stored values per state.
    pub fn state_len(&self) -> usize {
        2 * self.nx * self.ny
    }

    /// Number of model steps spanning `seconds`, or an error when not an integer multiple.
    pub fn steps_in(&self, seconds: f64) -> Result<usize> {
        let n = seconds / self.dt_seconds;
        let r = n.round();
        if (n - r).abs() > 1e-9 || r < 0.0 {
            return Err(Error::StepCount { seconds, dt: self.dt_seconds });
        }
        Ok(r as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_constants() {
        let c = QgConfig::reference();
        let (f1, f2) = c.coupling();
        assert!((f1 - 1.0e4 / 6000.0).abs() < 1e-12);
        assert!((f2 - 2.5).abs() < 1e-12);
        assert!((c.beta_hat() - 1.5).abs() < 1e-12);
        assert_eq!(c.state_len(), 1600);
    }

    #[test]
    fn presets_match_table() {
        let r = QgConfig::reference();
        let p = QgConfig::perturbed();
        assert_eq!((r.top_depth, r.bottom_depth, r.dt_seconds), (6000.0, 4000.0, 600.0));
        assert_eq!((p.top_depth, p.bottom_depth, p.dt_seconds), (5750.0, 4250.0, 1200.0));
        assert_eq!(r.orography, p.orography);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = QgConfig::reference();
        c.nx = 3;
        assert!(c.validate().is_err());
        let mut c = QgConfig::reference();
        c.top_depth = 0.0;
        assert!(c.validate().is_err());
        assert!(QgConfig::perturbed().validate().is_ok());
    }

    #[test]
    fn step_count() {
        let c = QgConfig::perturbed();
        assert_eq!(c.steps_in(86400.0).unwrap(), 72);
        assert!(c.steps_in(1000.0).is_err());
    }
}
