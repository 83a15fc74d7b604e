use super::control::{Background, ControlVector, Variant};
use super::window::Window;
use crate::cov::{Covariance, ObsOperator, WindowObservations};
use crate::error::{check_len, Error, Result};
use crate::nn::{ColumnCorrector, WeightVector};
use crate::qg::{QgModel, QgState};
use crate::util::{dot, sub};

/// Everything a window minimisation needs besides the priors and the data.
#[derive(Debug, Clone, Copy)]
pub struct DaContext<'a> {
    pub model: &'a QgModel,
    pub window: &'a Window,
    pub h: &'a ObsOperator,
    pub b: &'a Covariance,
    /// Prior covariance of `w` (WC).
    pub q: Option<&'a Covariance>,
    /// Prior covariance of `p` (NN).
    pub p: Option<&'a Covariance>,
    /// Corrector network. Its stored weights are used for SC; NN replaces them by the control.
    pub corrector: Option<&'a ColumnCorrector>,
}

impl<'a> DaContext<'a> {
    pub(crate) fn theta_cov(&self, v: Variant) -> Result<Option<&'a Covariance>> {
        let need = |c: Option<&'a Covariance>, what: &str| {
            c.map(Some).ok_or_else(|| Error::Config(format!("{v} assimilation needs a {what} covariance")))
        };
        match v {
            Variant::Sc => Ok(None),
            Variant::Wc => need(self.q, "model error"),
            Variant::Nn => need(self.p, "parameter"),
        }
    }

    pub(crate) fn corrector_for(&self, v: Variant) -> Result<Option<&'a ColumnCorrector>> {
        match (v, self.corrector) {
            (Variant::Nn, None) => Err(Error::Config("NN assimilation needs a corrector network".into())),
            (Variant::Wc, _) => Ok(None),
            (_, c) => Ok(c),
        }
    }

    /// Constant forcing applied over the window for control `ctl`.
    pub fn forcing(&self, ctl: &ControlVector) -> Result<Option<Vec<f64>>> {
        let v = ctl.variant()?;
        let grid = self.model.grid();
        match v {
            Variant::Sc => self.corrector.map(|c| c.apply(grid, &ctl.x0.psi)).transpose(),
            Variant::Wc => Ok(ctl.w.clone()),
            Variant::Nn => {
                let c = self.corrector_for(v)?.unwrap();
                Ok(Some(c.apply_with(ctl.p.as_ref().unwrap(), grid, &ctl.x0.psi)?))
            }
        }
    }

    pub(crate) fn check(&self, ctl: &ControlVector, bg: &Background, obs: &WindowObservations) -> Result<Variant> {
        let v = ctl.variant()?;
        ctl.expect(v)?;
        bg.expect(v)?;
        check_len("control state", self.model.grid().len(), ctl.x0.psi.len())?;
        check_len("background state", ctl.x0.psi.len(), bg.x0.psi.len())?;
        check_len("background extra block", ctl.theta().len(), bg.theta().len())?;
        if let Some(c) = self.theta_cov(v)? {
            check_len("prior covariance", c.dim(), ctl.theta().len())?;
        }
        self.corrector_for(v)?;
        self.window.check_obs(obs, self.h.len())?;
        Ok(v)
    }
}

/// Cost split into its terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostReport {
    pub total: f64,
    pub background: f64,
    /// Model-error (`w`) or parameter (`p`) term.
    pub model: f64,
    pub observation: f64,
    pub grad_norm: f64,
    /// Nonlinear cost at the start of each outer iteration, then at the analysis.
    pub history: Vec<f64>,
}

impl CostReport {
    pub fn from_terms(background: f64, model: f64, observation: f64) -> Self {
        Self { total: background + model + observation, background, model, observation, ..Default::default() }
    }
}

/// `½‖v‖²` in the metric `C⁻¹`.
pub(crate) fn mahalanobis(c: &Covariance, v: &[f64]) -> Result<f64> {
    let s = c.apply_inv_sqrt(v)?;
    Ok(0.5 * dot(&s, &s))
}

/// Observation term from the states at the batch times.
pub(crate) fn obs_term(h: &ObsOperator, states: &[&[f64]], obs: &WindowObservations) -> Result<f64> {
    let mut j = 0.0;
    for (psi, b) in states.iter().zip(&obs.batches) {
        let d = sub(&b.values, &h.observe(psi)?);
        j += 0.5 * dot(&d, &d) / (b.r * b.r);
    }
    Ok(j)
}

/// Integrate over the window and return every state, `x_0 ..= x_n`.
pub fn window_trajectory(
    model: &QgModel,
    window: &Window,
    x0: &QgState,
    forcing: Option<&[f64]>,
) -> Result<Vec<QgState>> {
    let mut out = Vec::with_capacity(window.n_steps + 1);
    let mut cur = QgState { valid_time: window.start_seconds, ..x0.clone() };
    out.push(cur.clone());
    for _ in 0..window.n_steps {
        cur = model.integrate(&cur, 1, forcing)?;
        out.push(cur.clone());
    }
    if !out.last().unwrap().is_finite() {
        return Err(Error::NonFinite(format!("trajectory of window starting at {} s", window.start_seconds)));
    }
    Ok(out)
}

/// States at the observation steps only.
fn batch_states(ctx: &DaContext, x0: &QgState, forcing: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
    let w = ctx.window;
    let last = w.last_obs_step();
    let mut at = vec![Vec::new(); last + 1];
    let mut cur = x0.clone();
    at[0] = cur.psi.clone();
    for k in 1..=last {
        cur = ctx.model.integrate(&cur, 1, forcing)?;
        if w.obs_steps.contains(&k) {
            at[k] = cur.psi.clone();
        }
    }
    if !cur.is_finite() {
        return Err(Error::NonFinite(format!("trajectory of window starting at {} s", w.start_seconds)));
    }
    Ok(w.obs_steps.iter().map(|s| std::mem::take(&mut at[*s])).collect::<Vec<_>>())
}

/// Nonlinear cost of any control vector.
pub fn cost(ctl: &ControlVector, bg: &Background, obs: &WindowObservations, ctx: &DaContext) -> Result<CostReport> {
    let v = ctx.check(ctl, bg, obs)?;
    let jb = mahalanobis(ctx.b, &sub(&ctl.x0.psi, &bg.x0.psi))?;
    let jm = match ctx.theta_cov(v)? {
        Some(c) => mahalanobis(c, &sub(ctl.theta(), bg.theta()))?,
        None => 0.0,
    };
    let forcing = ctx.forcing(ctl)?;
    let states = batch_states(ctx, &ctl.x0, forcing.as_deref())?;
    let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let jo = obs_term(ctx.h, &refs, obs)?;
    Ok(CostReport::from_terms(jb, jm, jo))
}

/// Strong-constraint cost of `x0`.
pub fn cost_sc(x0: &QgState, bg: &Background, obs: &WindowObservations, ctx: &DaContext) -> Result<CostReport> {
    cost(&ControlVector::sc(x0.clone()), bg, obs, ctx)
}

/// Weak-constraint cost of `(w, x0)`; `Q⁻¹` weights the single forcing once.
pub fn cost_wc(
    w: &[f64],
    x0: &QgState,
    bg: &Background,
    obs: &WindowObservations,
    ctx: &DaContext,
) -> Result<CostReport> {
    cost(&ControlVector::wc(x0.clone(), w.to_vec()), bg, obs, ctx)
}

/// NN cost of `(p, x0)` with the forcing `F(p, x0)` held over the window.
pub fn cost_nn(
    p: &WeightVector,
    x0: &QgState,
    bg: &Background,
    obs: &WindowObservations,
    ctx: &DaContext,
) -> Result<CostReport> {
    cost(&ControlVector::nn(x0.clone(), p.clone()), bg, obs, ctx)
}
