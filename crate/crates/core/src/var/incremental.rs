use super::control::{Background, ControlVector, Variant};
use super::cost::{mahalanobis, obs_term, CostReport, DaContext};
use crate::cov::{Covariance, WindowObservations};
use crate::error::{check_len, Result};
use crate::nn::CorrectorJacobian;
use crate::qg::TrajectoryTape;
use crate::util::{add, axpy, dot, sub};

/// Linear map from `(δθ, δx₀)` to the forcing increment `δw`, and its adjoint.
pub trait ForcingMap {
    /// `None` when the linearised model carries no forcing.
    fn tl(&self, dtheta: &[f64], dx0: &[f64]) -> Option<Vec<f64>>;
    /// Add the adjoint of `wt` to `theta_t` and `x0_t`.
    fn ad(&self, wt: &[f64], theta_t: &mut [f64], x0_t: &mut [f64]);
}

/// SC without a corrector.
pub struct Unforced;

impl ForcingMap for Unforced {
    fn tl(&self, _: &[f64], _: &[f64]) -> Option<Vec<f64>> {
        None
    }
    fn ad(&self, _: &[f64], _: &mut [f64], _: &mut [f64]) {}
}

/// WC: `δw = δθ`.
pub struct IdentityForcing;

impl ForcingMap for IdentityForcing {
    fn tl(&self, dtheta: &[f64], _: &[f64]) -> Option<Vec<f64>> {
        Some(dtheta.to_vec())
    }
    fn ad(&self, wt: &[f64], theta_t: &mut [f64], _: &mut [f64]) {
        axpy(1.0, wt, theta_t);
    }
}

/// SC with frozen weights: `δw = Fˣ δx₀`.
pub struct StateForcing<'a>(pub CorrectorJacobian<'a>);

impl ForcingMap for StateForcing<'_> {
    fn tl(&self, _: &[f64], dx0: &[f64]) -> Option<Vec<f64>> {
        Some(self.0.tl_state(dx0))
    }
    fn ad(&self, wt: &[f64], _: &mut [f64], x0_t: &mut [f64]) {
        axpy(1.0, &self.0.ad_state(wt), x0_t);
    }
}

/// NN: `δw = Fᵖ δp + Fˣ δx₀`.
pub struct NetForcing<'a>(pub CorrectorJacobian<'a>);

impl ForcingMap for NetForcing<'_> {
    fn tl(&self, dtheta: &[f64], dx0: &[f64]) -> Option<Vec<f64>> {
        Some(add(&self.0.tl_params(dtheta), &self.0.tl_state(dx0)))
    }
    fn ad(&self, wt: &[f64], theta_t: &mut [f64], x0_t: &mut [f64]) {
        let (xs, ps) = self.0.adjoint(wt, true, true);
        axpy(1.0, &xs.unwrap(), x0_t);
        axpy(1.0, &ps.unwrap(), theta_t);
    }
}

/// Outer-loop linearisation: first-guess trajectory, innovations, forcing map
/// and departures from the background.
pub struct Linearization<'a> {
    ctx: DaContext<'a>,
    pub variant: Variant,
    pub tape: TrajectoryTape,
    /// `d_k = y_k - H(x_k)` at each batch.
    pub innovations: Vec<Vec<f64>>,
    r: Vec<f64>,
    map: Box<dyn ForcingMap + 'a>,
    theta_cov: Option<&'a Covariance>,
    /// `xⁱ - xᵇ` and `θⁱ - θᵇ`.
    x_dep: Vec<f64>,
    theta_dep: Vec<f64>,
    /// Forcing held over the first-guess trajectory.
    pub forcing: Option<Vec<f64>>,
    /// Nonlinear cost of the first guess.
    pub cost: CostReport,
}

impl<'a> Linearization<'a> {
    pub fn new(
        ctx: &DaContext<'a>,
        first_guess: &ControlVector,
        bg: &Background,
        obs: &WindowObservations,
    ) -> Result<Self> {
        let variant = ctx.check(first_guess, bg, obs)?;
        let grid = ctx.model.grid();
        let psi0 = &first_guess.x0.psi;
        let (map, forcing): (Box<dyn ForcingMap + 'a>, Option<Vec<f64>>) = match (variant, ctx.corrector_for(variant)?)
        {
            (Variant::Sc, None) => (Box::new(Unforced), None),
            (Variant::Sc, Some(c)) => {
                let jac = c.linearize(&c.weights, grid, psi0)?;
                let w = jac.output.clone();
                (Box::new(StateForcing(jac)), Some(w))
            }
            (Variant::Wc, _) => (Box::new(IdentityForcing), first_guess.w.clone()),
            (Variant::Nn, c) => {
                let jac = c.unwrap().linearize(first_guess.p.as_ref().unwrap(), grid, psi0)?;
                let w = jac.output.clone();
                (Box::new(NetForcing(jac)), Some(w))
            }
        };
        let w = ctx.window;
        let t0 = w.start_seconds;
        let t1 = t0 + w.last_obs_step() as f64 * w.dt_seconds;
        let (_, tape) = match &forcing {
            Some(f) => ctx.model.resolvent_forced(f, &first_guess.x0, t0, t1)?,
            None => ctx.model.resolvent(&first_guess.x0, t0, t1)?,
        };
        let mut innovations = Vec::with_capacity(obs.batches.len());
        for (b, s) in obs.batches.iter().zip(&w.obs_steps) {
            innovations.push(sub(&b.values, &ctx.h.observe(&tape.states[*s].psi)?));
        }
        let r = obs.batches.iter().map(|b| b.r).collect();
        let theta_cov = ctx.theta_cov(variant)?;
        let x_dep = sub(psi0, &bg.x0.psi);
        let theta_dep = sub(first_guess.theta(), bg.theta());
        let jb = mahalanobis(ctx.b, &x_dep)?;
        let jm = theta_cov.map(|c| mahalanobis(c, &theta_dep)).transpose()?.unwrap_or(0.0);
        let states: Vec<&[f64]> = w.obs_steps.iter().map(|s| tape.states[*s].psi.as_slice()).collect();
        let jo = obs_term(ctx.h, &states, obs)?;
        Ok(Self {
            ctx: *ctx,
            variant,
            tape,
            innovations,
            r,
            map,
            theta_cov,
            x_dep,
            theta_dep,
            forcing,
            cost: CostReport::from_terms(jb, jm, jo),
        })
    }

    /// Swap the forcing map; used to compare code paths.
    pub fn with_forcing_map(mut self, map: Box<dyn ForcingMap + 'a>) -> Self {
        self.map = map;
        self
    }

    pub fn state_len(&self) -> usize {
        self.x_dep.len()
    }

    pub fn theta_len(&self) -> usize {
        self.theta_dep.len()
    }

    fn check(&self, dtheta: &[f64], dx0: &[f64]) -> Result<()> {
        check_len("state increment", self.state_len(), dx0.len())?;
        check_len("extra increment", self.theta_len(), dtheta.len())
    }

    /// Forward sweep: `H_k δx_k` for each batch.
    pub fn forward(&self, dtheta: &[f64], dx0: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check(dtheta, dx0)?;
        let dw = self.map.tl(dtheta, dx0);
        let steps = &self.ctx.window.obs_steps;
        let mut out = vec![Vec::new(); steps.len()];
        let mut cur = dx0.to_vec();
        let mut next = vec![0.0; cur.len()];
        for (k, rec) in std::iter::once(None).chain(self.tape.records.iter().map(Some)).enumerate() {
            if let Some(rec) = rec {
                self.ctx.model.step_tl(rec, &cur, &mut next);
                if let Some(w) = &dw {
                    axpy(1.0, w, &mut next);
                }
                std::mem::swap(&mut cur, &mut next);
            }
            for (b, s) in steps.iter().enumerate() {
                if *s == k {
                    out[b] = self.ctx.h.observe(&cur)?;
                }
            }
        }
        Ok(out)
    }

    /// Adjoint sweep: inject `Hᵀ z_k` at each batch, accumulate the forcing
    /// adjoint, then map back through the forcing. Returns `(θ̃, x̃₀)`.
    pub fn adjoint(&self, z: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let steps = &self.ctx.window.obs_steps;
        check_len("adjoint batches", steps.len(), z.len())?;
        let n = self.state_len();
        let mut inject = vec![Vec::new(); self.tape.n_steps() + 1];
        for (zb, s) in z.iter().zip(steps) {
            let hz = self.ctx.h.adjoint(zb)?;
            if inject[*s].is_empty() {
                inject[*s] = hz;
            } else {
                axpy(1.0, &hz, &mut inject[*s]);
            }
        }
        let mut lam = vec![0.0; n];
        let mut wt = vec![0.0; n];
        let mut prev = vec![0.0; n];
        for k in (1..=self.tape.n_steps()).rev() {
            axpy(1.0, &inject[k], &mut lam);
            axpy(1.0, &lam, &mut wt);
            self.ctx.model.step_ad(&self.tape.records[k - 1], &lam, &mut prev);
            std::mem::swap(&mut lam, &mut prev);
        }
        if !inject[0].is_empty() {
            axpy(1.0, &inject[0], &mut lam);
        }
        let mut theta_t = vec![0.0; self.theta_len()];
        self.map.ad(&wt, &mut theta_t, &mut lam);
        Ok((theta_t, lam))
    }

    /// `R⁻¹(H δx - d)` for each batch.
    fn weighted_residual(&self, hdx: &[Vec<f64>]) -> Vec<Vec<f64>> {
        hdx.iter()
            .zip(&self.innovations)
            .zip(&self.r)
            .map(|((h, d), r)| h.iter().zip(d).map(|(a, b)| (a - b) / (r * r)).collect())
            .collect()
    }

    /// Gradient of the quadratic cost at `(δθ, δx₀)`.
    pub fn gradient(&self, dtheta: &[f64], dx0: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = self.weighted_residual(&self.forward(dtheta, dx0)?);
        let (mut gt, mut gx) = self.adjoint(&z)?;
        axpy(1.0, &self.ctx.b.apply_inv(&add(&self.x_dep, dx0))?, &mut gx);
        if let Some(c) = self.theta_cov {
            axpy(1.0, &c.apply_inv(&add(&self.theta_dep, dtheta))?, &mut gt);
        }
        Ok((gt, gx))
    }

    /// Quadratic (incremental) cost at `(δθ, δx₀)`.
    pub fn quadratic_cost(&self, dtheta: &[f64], dx0: &[f64]) -> Result<f64> {
        let hdx = self.forward(dtheta, dx0)?;
        let mut j = mahalanobis(self.ctx.b, &add(&self.x_dep, dx0))?;
        if let Some(c) = self.theta_cov {
            j += mahalanobis(c, &add(&self.theta_dep, dtheta))?;
        }
        for ((h, d), r) in hdx.iter().zip(&self.innovations).zip(&self.r) {
            let e = sub(d, h);
            j += 0.5 * dot(&e, &e) / (r * r);
        }
        Ok(j)
    }

    /// `(δθ, δx₀) = (Θ^{1/2} χθ, B^{1/2} χx)`.
    pub(crate) fn from_chi(&self, ct: &[f64], cx: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let dt = match self.theta_cov {
            Some(c) => c.apply_sqrt(ct)?,
            None => Vec::new(),
        };
        Ok((dt, self.ctx.b.apply_sqrt(cx)?))
    }

    /// Background departure in χ-space, `(Θ^{-1/2}(θⁱ-θᵇ), B^{-1/2}(xⁱ-xᵇ))`.
    pub(crate) fn beta(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let bt = match self.theta_cov {
            Some(c) => c.apply_inv_sqrt(&self.theta_dep)?,
            None => Vec::new(),
        };
        Ok((bt, self.ctx.b.apply_inv_sqrt(&self.x_dep)?))
    }

    /// `Sᵀ Gᵀ z` with `S` the square-root preconditioner.
    pub(crate) fn adjoint_chi(&self, z: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (at, ax) = self.adjoint(z)?;
        let ct = match self.theta_cov {
            Some(c) => c.apply_sqrt_t(&at)?,
            None => Vec::new(),
        };
        Ok((ct, self.ctx.b.apply_sqrt_t(&ax)?))
    }

    /// `Sᵀ Gᵀ R⁻¹ G S χ`.
    pub(crate) fn gauss_newton_chi(&self, ct: &[f64], cx: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (dt, dx) = self.from_chi(ct, cx)?;
        let hdx = self.forward(&dt, &dx)?;
        let z: Vec<Vec<f64>> = hdx.iter().zip(&self.r).map(|(h, r)| h.iter().map(|a| a / (r * r)).collect()).collect();
        self.adjoint_chi(&z)
    }

    /// `Sᵀ Gᵀ R⁻¹ d`.
    pub(crate) fn innovation_chi(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let z: Vec<Vec<f64>> =
            self.innovations.iter().zip(&self.r).map(|(d, r)| d.iter().map(|a| a / (r * r)).collect()).collect();
        self.adjoint_chi(&z)
    }

    /// `½ Σ ‖d_k‖²_{R⁻¹}`.
    pub(crate) fn innovation_cost(&self) -> f64 {
        self.innovations.iter().zip(&self.r).map(|(d, r)| 0.5 * dot(d, d) / (r * r)).sum()
    }
}

/// Gradient of the incremental cost at `(δp, δx₀)`. The same sweep serves
/// every variant: the extra block is `δp` for NN, `δw` for WC and empty for SC.
pub fn gradient_incremental_nn(dp: &[f64], dx0: &[f64], lin: &Linearization) -> Result<(Vec<f64>, Vec<f64>)> {
    lin.gradient(dp, dx0)
}
