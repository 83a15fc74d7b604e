use std::fmt::Write as _;

use super::control::{Background, ControlVector, Variant};
use super::cost::{mahalanobis, obs_term, window_trajectory, CostReport, DaContext};
use super::incremental::Linearization;
use super::window::MinimizerConfig;
use crate::cov::WindowObservations;
use crate::error::{Error, Result};
use crate::qg::QgState;
use crate::util::{axpy, dot, norm, sub};

/// What happened inside one CG solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CgDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub negative_curvature: bool,
    /// Quadratic cost never increased (up to round-off).
    pub monotone: bool,
    /// Quadratic cost at χ = 0 and after each iteration.
    pub cost: Vec<f64>,
    /// ‖∇Ĵ‖ in χ-space at χ = 0.
    pub initial_grad_norm: f64,
    pub final_rel_residual: f64,
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub dtheta: Vec<f64>,
    pub dx0: Vec<f64>,
    pub diag: CgDiagnostics,
}

/// Conjugate gradient on `(I + SᵀGᵀR⁻¹GS) χ = -β + SᵀGᵀR⁻¹d`, with `S` the
/// covariance square roots. Returns the increment in physical variables.
pub fn inner_solve(lin: &Linearization, cfg: &MinimizerConfig) -> Result<InnerResult> {
    cfg.validate()?;
    let (bt, bx) = lin.beta()?;
    let (it, ix) = lin.innovation_chi()?;
    let nt = bt.len();
    let cat = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> { a.into_iter().chain(b).collect() };
    let beta = cat(bt, bx);
    let inn = cat(it, ix);
    let rhs = sub(&inn, &beta);
    let j0 = 0.5 * dot(&beta, &beta) + lin.innovation_cost();
    let rhs_norm = norm(&rhs);
    let mut diag = CgDiagnostics { monotone: true, cost: vec![j0], initial_grad_norm: rhs_norm, ..Default::default() };
    let mut x = vec![0.0; rhs.len()];
    if rhs_norm == 0.0 {
        diag.converged = true;
        let (dtheta, dx0) = lin.from_chi(&x[..nt], &x[nt..])?;
        return Ok(InnerResult { dtheta, dx0, diag });
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..cfg.n_inner {
        let (gt, gx) = lin.gauss_newton_chi(&p[..nt], &p[nt..])?;
        let mut ap = cat(gt, gx);
        axpy(1.0, &p, &mut ap);
        let curv = dot(&p, &ap);
        if !curv.is_finite() {
            return Err(Error::NonFinite("conjugate gradient curvature".into()));
        }
        if curv <= 0.0 {
            diag.negative_curvature = true;
            break;
        }
        let alpha = rr / curv;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        diag.iterations += 1;
        let j = j0 - 0.5 * dot(&x, &rhs.iter().zip(&r).map(|(a, b)| a + b).collect::<Vec<_>>());
        let prev = *diag.cost.last().unwrap();
        if j > prev + 1e-12 * prev.abs().max(1.0) {
            diag.monotone = false;
        }
        diag.cost.push(j);
        let rr_new = dot(&r, &r);
        diag.final_rel_residual = rr_new.sqrt() / rhs_norm;
        if diag.final_rel_residual <= cfg.cg_tol {
            diag.converged = true;
            break;
        }
        let b = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + b * *pi);
    }
    let (dtheta, dx0) = lin.from_chi(&x[..nt], &x[nt..])?;
    Ok(InnerResult { dtheta, dx0, diag })
}

/// Per-outer-iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterDiagnostics {
    pub outer: usize,
    /// Nonlinear cost of the first guess of this iteration.
    pub cost: CostReport,
    pub cg: CgDiagnostics,
}

/// Result of one window minimisation.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub variant: Variant,
    pub control: ControlVector,
    /// Nonlinear cost of the analysis, with the outer history.
    pub report: CostReport,
    pub outers: Vec<OuterDiagnostics>,
    /// Forcing held over the analysis trajectory.
    pub forcing: Option<Vec<f64>>,
    /// Analysis trajectory over the whole window, one state per model step.
    pub trajectory: Vec<QgState>,
}

impl Analysis {
    /// First-guess (background) nonlinear cost.
    pub fn first_guess_cost(&self) -> f64 {
        self.report.history[0]
    }

    /// Diagnostics lines for the minimiser log.
    pub fn log_lines(&self, cycle: usize) -> String {
        self.log_lines_as(cycle, self.variant.name())
    }

    /// Same as [`Analysis::log_lines`] with a caller-chosen variant label.
    pub fn log_lines_as(&self, cycle: usize, label: &str) -> String {
        let mut s = String::new();
        for o in &self.outers {
            let c = &o.cost;
            let _ = writeln!(
                s,
                "cycle={cycle} variant={label} outer={} inner={} converged={} neg_curv={} monotone={} \
                 jb={:.6e} jm={:.6e} jo={:.6e} j={:.6e} grad={:.6e}",
                o.outer,
                o.cg.iterations,
                o.cg.converged,
                o.cg.negative_curvature,
                o.cg.monotone,
                c.background,
                c.model,
                c.observation,
                c.total,
                c.grad_norm
            );
        }
        let c = &self.report;
        let _ = writeln!(
            s,
            "cycle={cycle} variant={label} analysis jb={:.6e} jm={:.6e} jo={:.6e} j={:.6e}",
            c.background, c.model, c.observation, c.total
        );
        s
    }
}

/// Incremental minimisation starting from the background.
pub fn outer_loop(
    ctx: &DaContext,
    bg: &Background,
    obs: &WindowObservations,
    cfg: &MinimizerConfig,
) -> Result<Analysis> {
    cfg.validate()?;
    let variant = ctx.check(bg, bg, obs)?;
    let mut fg = bg.clone();
    fg.x0.valid_time = ctx.window.start_seconds;
    let mut outers = Vec::with_capacity(cfg.n_outer);
    let mut history = Vec::with_capacity(cfg.n_outer + 1);
    for outer in 0..cfg.n_outer {
        let lin = Linearization::new(ctx, &fg, bg, obs)?;
        let inner = inner_solve(&lin, cfg)?;
        let mut cost = lin.cost.clone();
        cost.grad_norm = inner.diag.initial_grad_norm;
        history.push(cost.total);
        axpy(1.0, &inner.dx0, &mut fg.x0.psi);
        axpy(1.0, &inner.dtheta, fg.theta_mut());
        if !fg.x0.is_finite() || fg.theta().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{variant} analysis increment")));
        }
        outers.push(OuterDiagnostics { outer, cost, cg: inner.diag });
    }
    let forcing = ctx.forcing(&fg)?;
    let trajectory = window_trajectory(ctx.model, ctx.window, &fg.x0, forcing.as_deref())?;
    let jb = mahalanobis(ctx.b, &sub(&fg.x0.psi, &bg.x0.psi))?;
    let jm = ctx.theta_cov(variant)?.map(|c| mahalanobis(c, &sub(fg.theta(), bg.theta()))).transpose()?.unwrap_or(0.0);
    let states: Vec<&[f64]> = ctx.window.obs_steps.iter().map(|s| trajectory[*s].psi.as_slice()).collect();
    let jo = obs_term(ctx.h, &states, obs)?;
    let mut report = CostReport::from_terms(jb, jm, jo);
    history.push(report.total);
    report.history = history;
    Ok(Analysis { variant, control: fg, report, outers, forcing, trajectory })
}

/// Background of the next window: the analysis forecast to the window end,
/// with `w` and `p` carried over by persistence.
pub fn cycle(analysis: &Analysis) -> Background {
    let x0 = analysis.trajectory.last().unwrap().clone();
    ControlVector { x0, w: analysis.control.w.clone(), p: analysis.control.p.clone() }
}
