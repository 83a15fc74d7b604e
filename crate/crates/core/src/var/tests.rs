use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::cov::{
    simulate_observations, Covariance, CovarianceConfig, ObsBatch, ObsNetwork, ObsOperator, WindowObservations,
};
use crate::nn::{init_weights, ColumnCorrector, NetSpec, Normalization, WeightVector};
use crate::qg::{QgConfig, QgModel, QgState};
use crate::util::{dot, sub};

fn rvec(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

struct Fixture {
    model: QgModel,
    truth_model: QgModel,
    net: ObsNetwork,
    window: Window,
    h: ObsOperator,
    b: Covariance,
    q: Covariance,
    p: Covariance,
    corr: ColumnCorrector,
    x_true: QgState,
    x_b: QgState,
}

impl Fixture {
    /// 8×6 channel, 3 batches at steps 1, 3, 5 of a 6-step window.
    fn mini(seed: u64) -> Self {
        let mut cfg = QgConfig::perturbed().with_grid(8, 6);
        cfg.jet.amplitudes = [2.0, 1.0];
        let mut net = ObsNetwork::halton(crate::qg::Grid::new(8, 6), 10);
        net.interval_seconds = 2400.0;
        net.first_offset_seconds = 1200.0;
        net.window_seconds = 7200.0;
        Self::build(cfg, net, seed)
    }

    fn full(seed: u64) -> Self {
        Self::build(QgConfig::perturbed(), ObsNetwork::default_network(), seed)
    }

    fn build(cfg: QgConfig, net: ObsNetwork, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth_cfg = QgConfig { dt_seconds: cfg.dt_seconds, ..QgConfig::reference().with_grid(cfg.nx, cfg.ny) };
        let truth_cfg = QgConfig { jet: cfg.jet, ..truth_cfg };
        let model = QgModel::new(cfg).unwrap();
        let truth_model = QgModel::new(truth_cfg).unwrap();
        let grid = model.grid();
        let window = Window::new(0.0, &net, model.dt_seconds()).unwrap();
        let h = net.operator(grid).unwrap();
        // a model-error length wider than the channel leaves Q singular up to the eigen floor
        let cc = CovarianceConfig { long_length: 3.0, ..CovarianceConfig::default() };
        let spec = NetSpec::column_default();
        let mut norm = Normalization::identity();
        norm.out_std = vec![1e-3, 1e-3];
        let corr = ColumnCorrector::new(spec.clone(), init_weights(&spec, seed), norm).unwrap();
        let mut x_true = model.jet_state();
        let pert = rvec(grid.len(), 0.3, &mut rng);
        let bp = cc.background(grid).unwrap().apply_sqrt(&pert).unwrap();
        for (a, d) in x_true.psi.iter_mut().zip(&bp) {
            *a += d;
        }
        let err = cc.background(grid).unwrap().apply_sqrt(&rvec(grid.len(), 1.0, &mut rng)).unwrap();
        let x_b = QgState::new(grid, x_true.psi.iter().zip(&err).map(|(a, e)| a + e).collect(), 0.0).unwrap();
        Self {
            b: cc.background(grid).unwrap(),
            q: cc.model_error(grid).unwrap(),
            p: cc.parameters(corr.n_params()),
            model,
            truth_model,
            net,
            window,
            h,
            corr,
            x_true,
            x_b,
        }
    }

    fn ctx(&self, with_corrector: bool) -> DaContext<'_> {
        DaContext {
            model: &self.model,
            window: &self.window,
            h: &self.h,
            b: &self.b,
            q: Some(&self.q),
            p: Some(&self.p),
            corrector: with_corrector.then_some(&self.corr),
        }
    }

    /// Observations of the reference-model truth.
    fn observe(&self, r: f64, seed: u64) -> WindowObservations {
        let traj = window_trajectory(&self.truth_model, &self.window, &self.x_true, None).unwrap();
        let states: Vec<QgState> = self.window.obs_steps.iter().map(|s| traj[*s].clone()).collect();
        simulate_observations(&states, &self.net, 0.0, r, seed).unwrap()
    }

    /// Observations that the given control fits exactly.
    fn perfect_obs(&self, ctx: &DaContext, ctl: &ControlVector) -> WindowObservations {
        let f = ctx.forcing(ctl).unwrap();
        let traj = window_trajectory(&self.model, &self.window, &ctl.x0, f.as_deref()).unwrap();
        let states: Vec<QgState> = self.window.obs_steps.iter().map(|s| traj[*s].clone()).collect();
        simulate_observations(&states, &self.net, 0.0, 0.0, 0)
            .map(|mut o| {
                o.batches.iter_mut().for_each(|b| b.r = 0.2);
                o
            })
            .unwrap()
    }

    fn background(&self, v: Variant) -> Background {
        let n = self.model.grid().len();
        match v {
            Variant::Sc => ControlVector::sc(self.x_b.clone()),
            Variant::Wc => ControlVector::wc(self.x_b.clone(), vec![0.0; n]),
            Variant::Nn => ControlVector::nn(self.x_b.clone(), self.corr.weights.clone()),
        }
    }
}

fn dense(n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut e = vec![0.0; n];
    let mut cols = Vec::with_capacity(n);
    for c in 0..n {
        e[c] = 1.0;
        cols.push(DVector::from_vec(f(&e)));
        e[c] = 0.0;
    }
    DMatrix::from_columns(&cols)
}

/// Perturb a first guess away from the background for linearisation tests.
fn first_guess(fx: &Fixture, v: Variant, rng: &mut ChaCha8Rng) -> ControlVector {
    let mut fg = fx.background(v);
    let d = fx.b.apply_sqrt(&rvec(fg.x0.psi.len(), 0.5, rng)).unwrap();
    fg.x0.psi.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
    let nt = fg.theta().len();
    // a forcing outside the span of Q would make the penalty dominate everything
    let t = match v {
        Variant::Wc => fx.q.apply_sqrt(&rvec(nt, 1.0, rng)).unwrap(),
        _ => rvec(nt, 1e-2, rng),
    };
    fg.theta_mut().iter_mut().zip(&t).for_each(|(a, b)| *a += b);
    fg
}

#[test]
fn cost_zero_for_perfect_fit() {
    let fx = Fixture::mini(1);
    for v in [Variant::Sc, Variant::Wc, Variant::Nn] {
        let ctx = fx.ctx(v == Variant::Nn);
        let mut bg = fx.background(v);
        if v == Variant::Wc {
            bg.w = Some(vec![1e-3; bg.x0.psi.len()]);
        }
        let obs = fx.perfect_obs(&ctx, &bg);
        let c = cost(&bg, &bg, &obs, &ctx).unwrap();
        assert_eq!(c.total, 0.0, "{v}");
    }
}

#[test]
fn cost_without_observations_is_background_only() {
    let mut fx = Fixture::mini(2);
    fx.net.locations.clear();
    fx.h = fx.net.operator(fx.model.grid()).unwrap();
    let ctx = fx.ctx(false);
    let obs = WindowObservations {
        start_seconds: 0.0,
        batches: fx
            .window
            .batch_offsets
            .iter()
            .map(|o| ObsBatch { offset_seconds: *o, values: vec![], r: 0.2 })
            .collect(),
    };
    let bg = fx.background(Variant::Sc);
    let c = cost_sc(&fx.x_true, &bg, &obs, &ctx).unwrap();
    assert_eq!(c.observation, 0.0);
    assert!(c.background > 0.0);
    assert_eq!(c.total, c.background);
}

#[test]
fn cost_matches_dense_oracle() {
    let fx = Fixture::mini(3);
    let ctx = fx.ctx(false);
    let obs = fx.observe(0.2, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bg = fx.background(Variant::Wc);
    let w = fx.q.apply_sqrt(&rvec(bg.x0.psi.len(), 1.0, &mut rng)).unwrap();
    let rep = cost_wc(&w, &fx.x_true, &bg, &obs, &ctx).unwrap();

    let n = fx.model.grid().len();
    let binv = dense(n, |e| fx.b.apply(e).unwrap()).try_inverse().unwrap();
    let qinv = dense(n, |e| fx.q.apply(e).unwrap()).try_inverse().unwrap();
    let dx = DVector::from_vec(sub(&fx.x_true.psi, &fx.x_b.psi));
    let dw = DVector::from_vec(w.clone());
    let jb = 0.5 * dx.dot(&(&binv * &dx));
    let jq = 0.5 * dw.dot(&(&qinv * &dw));
    let mut jo = 0.0;
    let mut x = fx.x_true.clone();
    let g = fx.model.grid();
    for k in 1..=fx.window.n_steps {
        let (next, _) = fx.model.step(&x).unwrap();
        x = QgState::new(g, next.psi.iter().zip(&w).map(|(a, b)| a + b).collect(), next.valid_time).unwrap();
        if let Some(bi) = fx.window.obs_steps.iter().position(|s| *s == k) {
            let batch = &obs.batches[bi];
            for (loc, y) in fx.net.locations.iter().zip(&batch.values) {
                let (i0, j0) = (loc.x.floor() as usize, loc.y.floor() as usize);
                let (fx_, fy) = (loc.x - i0 as f64, loc.y - j0 as f64);
                let i1 = (i0 + 1) % g.nx;
                let j1 = (j0 + 1).min(g.ny - 1);
                let at = |j, i| x.at(loc.layer, j, i);
                let hx = (1.0 - fx_) * (1.0 - fy) * at(j0, i0)
                    + fx_ * (1.0 - fy) * at(j0, i1)
                    + (1.0 - fx_) * fy * at(j1, i0)
                    + fx_ * fy * at(j1, i1);
                jo += 0.5 * (y - hx).powi(2) / (batch.r * batch.r);
            }
        }
    }
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    // the dense inverses of the floored covariances have condition numbers near 1e12
    assert!(rel(rep.background, jb) < 1e-5, "{} {jb}", rep.background);
    assert!(rel(rep.model, jq) < 1e-5, "{} {jq}", rep.model);
    assert!(rel(rep.observation, jo) < 1e-12, "{} {jo}", rep.observation);
    assert_eq!(rep.total, rep.background + rep.model + rep.observation);
}

#[test]
fn cost_reduction_identities() {
    let fx = Fixture::mini(4);
    let obs = fx.observe(0.2, 8);
    let x0 = &fx.x_true;
    let n = x0.psi.len();
    let sc = cost_sc(x0, &fx.background(Variant::Sc), &obs, &fx.ctx(false)).unwrap();
    let wc = cost_wc(&vec![0.0; n], x0, &fx.background(Variant::Wc), &obs, &fx.ctx(false)).unwrap();
    assert!((sc.total - wc.total).abs() <= 1e-12 * sc.total);

    // zero weights and zero output mean give F = 0
    let mut zero = fx.corr.clone();
    zero.weights = WeightVector::zeros(&zero.spec);
    zero.norm.out_mean = vec![0.0, 0.0];
    let ctx = DaContext { corrector: Some(&zero), ..fx.ctx(false) };
    let bg = ControlVector::nn(fx.x_b.clone(), zero.weights.clone());
    let nn = cost_nn(&zero.weights, x0, &bg, &obs, &ctx).unwrap();
    assert!((sc.total - nn.total).abs() <= 1e-12 * sc.total);

    // NN cost through the WC cost with w = F(p, x0)
    let ctx = fx.ctx(true);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = WeightVector(fx.corr.weights.0.iter().map(|v| v + 0.01 * rng.random_range(-1.0..1.0)).collect());
    let nn = cost_nn(&p, x0, &fx.background(Variant::Nn), &obs, &ctx).unwrap();
    let f = fx.corr.apply_with(&p, fx.model.grid(), &x0.psi).unwrap();
    let wc = cost_wc(&f, x0, &fx.background(Variant::Wc), &obs, &ctx).unwrap();
    assert_eq!(nn.observation, wc.observation);
    assert_eq!(nn.background, wc.background);
    // round-off scales with the largest term, here the forcing penalty
    let cross = wc.total + nn.model - wc.model;
    assert!((nn.total - cross).abs() <= 1e-12 * wc.total, "{} {cross}", nn.total);
}

fn fd_check(v: Variant, seed: u64) {
    let fx = Fixture::mini(seed);
    let ctx = fx.ctx(v != Variant::Wc);
    let obs = fx.observe(0.2, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg = fx.background(v);
    let fg = first_guess(&fx, v, &mut rng);
    let lin = Linearization::new(&ctx, &fg, &bg, &obs).unwrap();
    // covariance-shaped increments keep the cost, and so its round-off, moderate
    let dt = match v {
        Variant::Wc => fx.q.apply_sqrt(&rvec(lin.theta_len(), 0.1, &mut rng)).unwrap(),
        _ => rvec(lin.theta_len(), 1e-2, &mut rng),
    };
    let dx = fx.b.apply_sqrt(&rvec(lin.state_len(), 0.1, &mut rng)).unwrap();
    let (gt, gx) = gradient_incremental_nn(&dt, &dx, &lin).unwrap();
    let j0 = lin.quadratic_cost(&dt, &dx).unwrap();
    let eval = |blk: usize, c: usize, h: f64| {
        let (mut t, mut x) = (dt.clone(), dx.clone());
        if blk == 0 {
            t[c] += h;
        } else {
            x[c] += h;
        }
        lin.quadratic_cost(&t, &x).unwrap()
    };
    // The cost is quadratic, so a central difference is exact up to round-off.
    // The step is sized from the curvature so the perturbed cost stays near j0.
    let mut worst: f64 = 0.0;
    for (blk, g) in [(0, &gt), (1, &gx)] {
        for c in 0..g.len() {
            let curv = (eval(blk, c, 1e-3) + eval(blk, c, -1e-3) - 2.0 * j0) / 1e-6;
            let eps = (j0 / curv.abs().max(1e-300)).sqrt().min(1.0);
            let fd = (eval(blk, c, eps) - eval(blk, c, -eps)) / (2.0 * eps);
            worst = worst.max((fd - g[c]).abs() / g[c].abs());
        }
    }
    assert!(worst <= 1e-8, "{v}: worst relative FD error {worst:e}");
}

#[test]
fn quadratic_gradient_fd_nn() {
    fd_check(Variant::Nn, 11);
}

#[test]
fn quadratic_gradient_fd_wc() {
    fd_check(Variant::Wc, 12);
}

#[test]
fn quadratic_gradient_fd_sc_with_corrector() {
    fd_check(Variant::Sc, 13);
}

#[test]
fn gateaux_derivative() {
    let fx = Fixture::mini(14);
    let ctx = fx.ctx(true);
    let obs = fx.observe(0.2, 14);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let bg = fx.background(Variant::Nn);
    let fg = first_guess(&fx, Variant::Nn, &mut rng);
    let lin = Linearization::new(&ctx, &fg, &bg, &obs).unwrap();
    let zt = vec![0.0; lin.theta_len()];
    let zx = vec![0.0; lin.state_len()];
    let (gt, gx) = lin.gradient(&zt, &zx).unwrap();
    let ut = rvec(lin.theta_len(), 1.0, &mut rng);
    let ux = rvec(lin.state_len(), 1.0, &mut rng);
    let dd = dot(&gt, &ut) + dot(&gx, &ux);
    for eps in [1e-2, 1e-3, 1e-4] {
        let s = |a: f64| -> (Vec<f64>, Vec<f64>) {
            (ut.iter().map(|v| a * v).collect(), ux.iter().map(|v| a * v).collect())
        };
        let (pt, px) = s(eps);
        let (mt, mx) = s(-eps);
        let fd = (lin.quadratic_cost(&pt, &px).unwrap() - lin.quadratic_cost(&mt, &mx).unwrap()) / (2.0 * eps);
        assert!((fd - dd).abs() <= 1e-7 * dd.abs(), "eps {eps}: {fd} vs {dd}");
    }
}

#[test]
fn gradient_zero_at_background_with_zero_innovations() {
    let fx = Fixture::mini(15);
    let ctx = fx.ctx(true);
    let bg = fx.background(Variant::Nn);
    let obs = fx.perfect_obs(&ctx, &bg);
    let lin = Linearization::new(&ctx, &bg, &bg, &obs).unwrap();
    let (gt, gx) = lin.gradient(&vec![0.0; lin.theta_len()], &vec![0.0; lin.state_len()]).unwrap();
    assert!(gt.iter().chain(&gx).all(|v| *v == 0.0));
}

/// Forcing map that returns a fixed `δw` and records the forcing adjoint.
struct Capture {
    dw: Vec<f64>,
    seen: RefCell<Vec<f64>>,
}

impl ForcingMap for &Capture {
    fn tl(&self, _: &[f64], _: &[f64]) -> Option<Vec<f64>> {
        Some(self.dw.clone())
    }
    fn ad(&self, wt: &[f64], _: &mut [f64], _: &mut [f64]) {
        *self.seen.borrow_mut() = wt.to_vec();
    }
}

#[test]
fn nn_sweep_reduces_to_wc_sweep() {
    let fx = Fixture::mini(16);
    let obs = fx.observe(0.2, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let ctx = fx.ctx(true);
    let fg = first_guess(&fx, Variant::Nn, &mut rng);
    let lin_nn = Linearization::new(&ctx, &fg, &fx.background(Variant::Nn), &obs).unwrap();
    let w = fx.corr.apply_with(fg.p.as_ref().unwrap(), fx.model.grid(), &fg.x0.psi).unwrap();
    let fg_wc = ControlVector::wc(fg.x0.clone(), w);
    let lin_wc = Linearization::new(&ctx, &fg_wc, &fx.background(Variant::Wc), &obs).unwrap();

    let n = lin_wc.state_len();
    let dw = rvec(n, 1e-3, &mut rng);
    let dx = rvec(n, 0.1, &mut rng);
    let cap = Capture { dw: dw.clone(), seen: RefCell::new(vec![]) };
    let lin_nn = lin_nn.with_forcing_map(Box::new(&cap));
    let a = lin_nn.forward(&vec![0.0; lin_nn.theta_len()], &dx).unwrap();
    let b = lin_wc.forward(&dw, &dx).unwrap();
    let z: Vec<Vec<f64>> = a.iter().map(|v| rvec(v.len(), 1.0, &mut rng)).collect();
    let (_, xa) = lin_nn.adjoint(&z).unwrap();
    let (wb, xb) = lin_wc.adjoint(&z).unwrap();
    let close = |u: &[f64], v: &[f64]| {
        let d = sub(u, v);
        dot(&d, &d).sqrt() <= 1e-12 * dot(v, v).sqrt()
    };
    for (u, v) in a.iter().zip(&b) {
        assert!(close(u, v));
    }
    assert!(close(&xa, &xb));
    assert!(close(&cap.seen.borrow(), &wb));
}

#[test]
fn inner_solve_without_observations_returns_background() {
    let mut fx = Fixture::mini(17);
    fx.net.locations.clear();
    fx.h = fx.net.operator(fx.model.grid()).unwrap();
    let ctx = fx.ctx(false);
    let obs = WindowObservations {
        start_seconds: 0.0,
        batches: fx
            .window
            .batch_offsets
            .iter()
            .map(|o| ObsBatch { offset_seconds: *o, values: vec![], r: 0.2 })
            .collect(),
    };
    let bg = fx.background(Variant::Sc);
    let lin = Linearization::new(&ctx, &bg, &bg, &obs).unwrap();
    let res = inner_solve(&lin, &MinimizerConfig::default()).unwrap();
    assert!(res.dx0.iter().all(|v| *v == 0.0));
    let fg = ControlVector::sc(fx.x_true.clone());
    let lin = Linearization::new(&ctx, &fg, &bg, &obs).unwrap();
    let res = inner_solve(&lin, &MinimizerConfig::default()).unwrap();
    let want = sub(&fx.x_b.psi, &fx.x_true.psi);
    let err = sub(&res.dx0, &want);
    assert!(dot(&err, &err).sqrt() <= 1e-10 * dot(&want, &want).sqrt());
}

#[test]
fn inner_solve_matches_dense_normal_equations() {
    let fx = Fixture::mini(18);
    let ctx = fx.ctx(false);
    let obs = fx.observe(0.2, 18);
    let bg = fx.background(Variant::Sc);
    let lin = Linearization::new(&ctx, &bg, &bg, &obs).unwrap();
    let cfg = MinimizerConfig { n_outer: 1, n_inner: 500, cg_tol: 1e-13 };
    let res = inner_solve(&lin, &cfg).unwrap();
    assert!(res.diag.converged && res.diag.monotone);

    let n = lin.state_len();
    let g = dense(n, |e| lin.forward(&[], e).unwrap().concat());
    let bm = dense(n, |e| fx.b.apply(e).unwrap());
    let d = DVector::from_vec(lin.innovations.concat());
    let m = g.nrows();
    let r = DMatrix::<f64>::identity(m, m) * 0.04;
    let s = &g * &bm * g.transpose() + r;
    let dx = &bm * g.transpose() * s.lu().solve(&d).unwrap();
    let err = sub(&res.dx0, dx.as_slice());
    let rel = dot(&err, &err).sqrt() / dx.norm();
    assert!(rel <= 1e-6, "relative error {rel:e}");
}

#[test]
fn outer_loop_keeps_perfect_background() {
    let fx = Fixture::mini(19);
    for v in [Variant::Sc, Variant::Wc, Variant::Nn] {
        let ctx = fx.ctx(v == Variant::Nn);
        let bg = fx.background(v);
        let obs = fx.perfect_obs(&ctx, &bg);
        let a = outer_loop(&ctx, &bg, &obs, &MinimizerConfig::default()).unwrap();
        assert_eq!(a.control.x0.psi, bg.x0.psi, "{v}");
        assert_eq!(a.control.theta(), bg.theta());
        assert_eq!(a.report.total, 0.0);
    }
}

#[test]
fn frozen_parameters_match_sc_with_corrector() {
    let mut fx = Fixture::mini(20);
    fx.p = Covariance::diagonal(1e-12, fx.corr.n_params());
    let obs = fx.observe(0.2, 20);
    let ctx = fx.ctx(true);
    let cfg = MinimizerConfig { cg_tol: 1e-10, n_inner: 200, ..Default::default() };
    let nn = outer_loop(&ctx, &fx.background(Variant::Nn), &obs, &cfg).unwrap();
    let sc = outer_loop(&ctx, &fx.background(Variant::Sc), &obs, &cfg).unwrap();
    let dp = sub(nn.control.theta(), fx.corr.weights.as_slice());
    assert!(dp.iter().all(|v| v.abs() < 1e-9));
    let e = sub(&nn.control.x0.psi, &sc.control.x0.psi);
    let rel = dot(&e, &e).sqrt() / dot(&sc.control.x0.psi, &sc.control.x0.psi).sqrt();
    assert!(rel <= 1e-6, "{rel:e}");
}

#[test]
fn analysis_cost_below_first_guess_at_defaults() {
    let fx = Fixture::full(21);
    let obs = fx.observe(0.2, 21);
    for v in [Variant::Sc, Variant::Wc, Variant::Nn] {
        let ctx = fx.ctx(v == Variant::Nn);
        let a = outer_loop(&ctx, &fx.background(v), &obs, &MinimizerConfig::default()).unwrap();
        let h = &a.report.history;
        assert_eq!(h.len(), 3);
        assert!(h[2] <= h[0], "{v}: {h:?}");
        for o in &a.outers {
            assert!(o.cg.monotone && !o.cg.negative_curvature, "{v}: {:?}", o.cg);
        }
        let direct = cost(&a.control, &fx.background(v), &obs, &ctx).unwrap();
        assert_eq!(direct.total, a.report.total);
        assert!(a.log_lines(0).lines().count() == 3);
    }
}

#[test]
fn cycle_is_variant_consistent() {
    let fx = Fixture::mini(22);
    let obs = fx.observe(0.2, 22);
    let cfg = MinimizerConfig::default();
    let sc = outer_loop(&fx.ctx(false), &fx.background(Variant::Sc), &obs, &cfg).unwrap();
    let next = cycle(&sc);
    let direct = fx.model.integrate(&sc.control.x0, fx.window.n_steps, None).unwrap();
    assert_eq!(next.x0, direct);
    assert_eq!(next.x0.valid_time, fx.window.end_seconds());

    let nn = outer_loop(&fx.ctx(true), &fx.background(Variant::Nn), &obs, &cfg).unwrap();
    let next = cycle(&nn);
    let w = fx.corr.apply_with(nn.control.p.as_ref().unwrap(), fx.model.grid(), &nn.control.x0.psi).unwrap();
    let wc_run = window_trajectory(&fx.model, &fx.window, &nn.control.x0, Some(&w)).unwrap();
    assert_eq!(&next.x0, wc_run.last().unwrap());
    assert_eq!(next.p, nn.control.p);

    let zero = ControlVector::wc(sc.control.x0.clone(), vec![0.0; w.len()]);
    let wc_zero = window_trajectory(&fx.model, &fx.window, &zero.x0, zero.w.as_deref()).unwrap();
    assert_eq!(wc_zero.last().unwrap(), &cycle(&sc).x0);
}
