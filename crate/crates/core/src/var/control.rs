use std::fmt;

use crate::error::{check_len, Error, Result};
use crate::nn::WeightVector;
use crate::qg::QgState;
use crate::util::{axpy, dot};

/// Assimilation formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Strong constraint. When the context carries a corrector its forcing
    /// `F(p, x₀)` is applied with `p` frozen.
    Sc,
    /// Weak constraint with a constant forcing `w` in the control.
    Wc,
    /// Corrector weights `p` in the control.
    Nn,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Sc => "SC",
            Variant::Wc => "WC",
            Variant::Nn => "NN",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Minimisation variable: `x₀`, `(w, x₀)` or `(p, x₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector {
    pub x0: QgState,
    pub w: Option<Vec<f64>>,
    pub p: Option<WeightVector>,
}

/// Prior control of a window. Same layout as the control itself.
pub type Background = ControlVector;

impl ControlVector {
    pub fn sc(x0: QgState) -> Self {
        Self { x0, w: None, p: None }
    }

    pub fn wc(x0: QgState, w: Vec<f64>) -> Self {
        Self { x0, w: Some(w), p: None }
    }

    pub fn nn(x0: QgState, p: WeightVector) -> Self {
        Self { x0, w: None, p: Some(p) }
    }

    pub fn variant(&self) -> Result<Variant> {
        match (&self.w, &self.p) {
            (None, None) => Ok(Variant::Sc),
            (Some(_), None) => Ok(Variant::Wc),
            (None, Some(_)) => Ok(Variant::Nn),
            (Some(_), Some(_)) => Err(Error::Config("control vector carries both w and p".into())),
        }
    }

    /// Check the fields match `v` and have the right sizes.
    pub fn expect(&self, v: Variant) -> Result<()> {
        let got = self.variant()?;
        if got != v {
            return Err(Error::Config(format!("expected a {v} control vector, got {got}")));
        }
        if let Some(w) = &self.w {
            check_len("forcing", self.x0.psi.len(), w.len())?;
        }
        Ok(())
    }

    /// Extra block (`w` or `p`) as a flat slice; empty for SC.
    pub fn theta(&self) -> &[f64] {
        match (&self.w, &self.p) {
            (Some(w), _) => w,
            (_, Some(p)) => p.as_slice(),
            _ => &[],
        }
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        match (&mut self.w, &mut self.p) {
            (Some(w), _) => w,
            (_, Some(p)) => &mut p.0,
            _ => &mut [],
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.variant()? != other.variant()? {
            return Err(Error::Config("control vectors of different variants".into()));
        }
        check_len("control state", self.x0.psi.len(), other.x0.psi.len())?;
        check_len("control extra block", self.theta().len(), other.theta().len())
    }

    /// `self += alpha * other`, blockwise.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_same(other)?;
        axpy(alpha, &other.x0.psi, &mut self.x0.psi);
        let t = other.theta().to_vec();
        axpy(alpha, &t, self.theta_mut());
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.x0.psi.iter_mut().for_each(|v| *v *= alpha);
        self.theta_mut().iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(dot(&self.x0.psi, &other.x0.psi) + dot(self.theta(), other.theta()))
    }
}
