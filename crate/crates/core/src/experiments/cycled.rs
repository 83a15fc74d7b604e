use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::plan::{ExperimentPlan, VariantKind};
use super::record::CycleRecord;
use super::truth::{ObsArchive, Truth};
use crate::cov::{Covariance, CovarianceConfig, ObsNetwork, ObsOperator};
use crate::error::{Error, Result};
use crate::nn::ColumnCorrector;
use crate::qg::{QgModel, QgState};
use crate::util::mix_seed;
use crate::var::{cycle, outer_loop, window_trajectory, Background, ControlVector, DaContext, MinimizerConfig, Window};

/// Fixed ingredients of a cycled run.
pub struct DaSetup<'a> {
    /// Assimilating model.
    pub model: &'a QgModel,
    pub net: &'a ObsNetwork,
    pub covariances: &'a CovarianceConfig,
    pub minimizer: MinimizerConfig,
    /// Offline correction for SC-NNt/SC-NNa; architecture and prior weights for NN.
    pub corrector: Option<&'a ColumnCorrector>,
}

/// Operators built once per setup and variant.
struct Operators {
    h: ObsOperator,
    b: Covariance,
    q: Option<Covariance>,
    p: Option<Covariance>,
}

impl DaSetup<'_> {
    fn corrector_for(&self, kind: VariantKind) -> Result<Option<&ColumnCorrector>> {
        if !kind.uses_net() {
            return Ok(None);
        }
        self.corrector.map(Some).ok_or_else(|| Error::Config(format!("{kind} needs trained weights")))
    }

    fn operators(&self, kind: VariantKind) -> Result<Operators> {
        let g = self.model.grid();
        let q = match kind {
            VariantKind::Wc => Some(self.covariances.model_error(g)?),
            _ => None,
        };
        let p = match kind {
            VariantKind::Nn => Some(self.covariances.parameters(self.corrector_for(kind)?.unwrap().n_params())),
            _ => None,
        };
        Ok(Operators { h: self.net.operator(g)?, b: self.covariances.background(g)?, q, p })
    }

    /// Model steps between two stored truth samples.
    fn sample_stride(&self, truth: &Truth) -> Result<usize> {
        self.model.config().steps_in(truth.sample_seconds)
    }
}

/// Truth plus `B^{1/2} ξ`, with `w = 0` and the prior weights where needed.
pub fn initial_background(setup: &DaSetup, plan: &ExperimentPlan, rep: usize, truth: &Truth) -> Result<Background> {
    let g = setup.model.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[plan.seed, rep as u64, 0x6267]));
    let xi: Vec<f64> = (0..g.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let dx = setup.covariances.background(g)?.apply_sqrt(&xi)?;
    let t = truth.window_start(plan.truth_cycle(rep, 0))?;
    let x0 = QgState::new(g, t.psi.iter().zip(&dx).map(|(a, d)| a + d).collect(), t.valid_time)?;
    background_for(setup, plan.variant, x0)
}

/// Background with the variant's extra control components at their priors.
pub fn background_for(setup: &DaSetup, kind: VariantKind, x0: QgState) -> Result<Background> {
    Ok(match kind {
        VariantKind::Wc => ControlVector::wc(x0, vec![0.0; setup.model.grid().len()]),
        VariantKind::Nn => ControlVector::nn(x0, setup.corrector_for(kind)?.unwrap().weights.clone()),
        _ => ControlVector::sc(x0),
    })
}

/// Mean RMSE against the truth samples of the window.
pub fn window_rmse(traj: &[QgState], stride: usize, samples: &[QgState]) -> f64 {
    let s: f64 = samples.iter().enumerate().map(|(k, t)| traj[k * stride].rmse(t)).sum();
    s / samples.len() as f64
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Output of one repetition.
#[derive(Debug, Clone)]
pub struct DaRun {
    /// All cycles, spin-up included.
    pub records: Vec<CycleRecord>,
    /// Minimiser diagnostics, one block per cycle.
    pub log: String,
    pub diverged: bool,
}

/// Cycled assimilation of one repetition starting from `bg`.
///
/// A cycle whose RMSE exceeds 100 observation stds, or whose minimisation
/// fails numerically, ends the run with a flagged record.
pub fn run_cycled_da(
    setup: &DaSetup,
    plan: &ExperimentPlan,
    rep: usize,
    truth: &Truth,
    obs: &ObsArchive,
    mut bg: Background,
) -> Result<DaRun> {
    plan.validate()?;
    let kind = plan.variant;
    let ops = setup.operators(kind)?;
    let corrector = setup.corrector_for(kind)?;
    let stride = setup.sample_stride(truth)?;
    let limit = 100.0 * setup.covariances.r;
    let mut out = DaRun { records: Vec::with_capacity(plan.total_cycles), log: String::new(), diverged: false };
    for c in 0..plan.total_cycles {
        let tc = plan.truth_cycle(rep, c);
        let window = Window::new(tc as f64 * truth.window_seconds, setup.net, setup.model.dt_seconds())?;
        let samples = truth.window_samples(tc)?;
        let ctx = DaContext {
            model: setup.model,
            window: &window,
            h: &ops.h,
            b: &ops.b,
            q: ops.q.as_ref(),
            p: ops.p.as_ref(),
            corrector,
        };
        bg.x0.valid_time = window.start_seconds;
        let fg_rmse = match ctx.forcing(&bg).and_then(|f| window_trajectory(setup.model, &window, &bg.x0, f.as_deref()))
        {
            Ok(traj) => finite_or_inf(window_rmse(&traj, stride, samples)),
            Err(e) if e.exit_code() == 3 => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let mut rec = CycleRecord::new(c, bg.x0.clone(), bg.x0.clone());
        rec.fg_rmse = fg_rmse;
        let analysis = if fg_rmse > limit {
            None
        } else {
            match outer_loop(&ctx, &bg, obs.window(tc)?, &setup.minimizer) {
                Ok(a) => Some(a),
                Err(e) if e.exit_code() == 3 => None,
                Err(e) => return Err(e),
            }
        };
        let Some(a) = analysis else {
            rec.an_rmse = f64::INFINITY;
            rec.diverged = true;
            out.log += &format!("cycle={c} variant={kind} diverged fg_rmse={fg_rmse:.6e}\n");
            out.records.push(rec);
            out.diverged = true;
            break;
        };
        rec.an_rmse = finite_or_inf(window_rmse(&a.trajectory, stride, samples));
        rec.analysis = a.control.x0.clone();
        rec.w = a.control.w.clone();
        rec.p = a.control.p.clone();
        rec.cost = a.report.clone();
        rec.inner_iters = a.outers.iter().map(|o| o.cg.iterations).sum();
        out.log += &a.log_lines_as(c, kind.name());
        let bad = rec.an_rmse > limit;
        rec.diverged = bad;
        out.records.push(rec);
        if bad {
            out.diverged = true;
            break;
        }
        bg = cycle(&a);
    }
    Ok(out)
}
