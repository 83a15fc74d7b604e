//! In-memory pipeline stages shared by the command line and the acceptance checks.

use crate::cov::ObsNetwork;
use crate::error::{Error, Result};
use crate::experiments::{
    initial_background, run_cycled_da, run_forecast_suite, run_truth, simulate_archive, DaRun, DaSetup, ExperimentPlan,
    ForecastRecord, ObsArchive, Truth, TruthConfig, UpdatePolicy, VariantKind,
};
use crate::io::RunConfig;
use crate::nn::ColumnCorrector;
use crate::qg::QgModel;
use crate::training::{
    adam_train, build_dataset, evaluate_normalized_mse, increment_scaling, truth_pairs, Dataset, TrainingHistory,
    TrainingPair,
};
use crate::util::{mix_seed, run_jobs};

pub struct Models {
    pub truth: QgModel,
    pub assim: QgModel,
}

impl Models {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            truth: QgModel::new(cfg.models.truth.clone())?,
            assim: QgModel::new(cfg.models.assimilating.clone())?,
        })
    }
}

pub fn make_truth(cfg: &RunConfig, models: &Models, days: usize) -> Result<Truth> {
    run_truth(&models.truth, &cfg.truth_config(), cfg.seed, days)
}

pub fn observe(cfg: &RunConfig, net: &ObsNetwork, truth: &Truth) -> Result<ObsArchive> {
    simulate_archive(truth, net, cfg.covariance.r, cfg.seed, 0..truth.n_windows())
}

fn setup<'a>(
    cfg: &'a RunConfig,
    models: &'a Models,
    net: &'a ObsNetwork,
    corrector: Option<&'a ColumnCorrector>,
) -> DaSetup<'a> {
    DaSetup { model: &models.assim, net, covariances: &cfg.covariance, minimizer: cfg.minimizer, corrector }
}

/// Trained networks of one dataset kind, one per seed.
#[derive(Debug, Clone)]
pub struct TrainedNets {
    pub nets: Vec<ColumnCorrector>,
    pub histories: Vec<TrainingHistory>,
    /// Normalised test MSE against true model error.
    pub test_mse: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OfflineOutcome {
    /// SC run whose increments form the analysis dataset.
    pub dataset_run: DaRun,
    pub truth_trained: TrainedNets,
    pub analysis_trained: TrainedNets,
}

/// Test pairs from an independent truth run.
pub fn test_pairs(cfg: &RunConfig, models: &Models) -> Result<Vec<TrainingPair>> {
    let tc = TruthConfig { sample_seconds: cfg.observations.window_seconds, ..cfg.truth_config() };
    let t = run_truth(&models.truth, &tc, mix_seed(&[cfg.seed, 0x7465_7374]), cfg.training.n_test_pairs)?;
    let steps = models.assim.config().steps_in(cfg.observations.window_seconds)?;
    let scaling = increment_scaling(models.assim.dt_seconds(), cfg.observations.window_seconds);
    truth_pairs(&models.assim, &t.states, 0, steps, scaling)
}

/// Analysis-increment and true-model-error datasets over the same cycles.
pub fn datasets(cfg: &RunConfig, models: &Models, truth: &Truth, run: &DaRun) -> Result<(Dataset, Dataset)> {
    let tr = &cfg.training;
    let (a, n) = (tr.dataset_spin_up, tr.n_pairs);
    let scaling = increment_scaling(models.assim.dt_seconds(), cfg.observations.window_seconds);
    if run.records.len() < a + n + 1 {
        return Err(Error::Insufficient(format!("dataset run has {} cycles, {} needed", run.records.len(), a + n + 1)));
    }
    let analysis = build_dataset(&run.records[a..a + n + 1], n, scaling)?;
    let steps = models.assim.config().steps_in(cfg.observations.window_seconds)?;
    let starts = truth.window_starts(a..a + n)?;
    let truth_ds = Dataset::from_pairs(models.assim.grid(), truth_pairs(&models.assim, &starts, a, steps, scaling)?)?;
    Ok((truth_ds, analysis))
}

/// SC dataset run, then one net per seed on each dataset.
pub fn train_offline(
    cfg: &RunConfig,
    models: &Models,
    net: &ObsNetwork,
    truth: &Truth,
    obs: &ObsArchive,
    jobs: usize,
) -> Result<OfflineOutcome> {
    let tr = &cfg.training;
    let plan = ExperimentPlan {
        first_cycle: 0,
        seed: cfg.seed,
        ..ExperimentPlan::new(VariantKind::Sc, tr.dataset_cycles, tr.dataset_spin_up, 1)
    };
    let s = setup(cfg, models, net, None);
    let run = run_cycled_da(&s, &plan, 0, truth, obs, initial_background(&s, &plan, 0, truth)?)?;
    if run.diverged {
        return Err(Error::Diverged { cycle: run.records.len() - 1, reason: "dataset run diverged".into() });
    }
    let (truth_ds, analysis_ds) = datasets(cfg, models, truth, &run)?;
    let test = test_pairs(cfg, models)?;
    let spec = cfg.net_spec()?;
    let k = tr.net_seeds.len();
    let results = run_jobs(jobs, 2 * k, |j| {
        let ds = if j < k { &truth_ds } else { &analysis_ds };
        let adam = crate::training::AdamConfig { seed: tr.net_seeds[j % k], ..tr.adam };
        let (c, h) = adam_train(ds, &spec, &adam)?;
        let m = evaluate_normalized_mse(&c, models.assim.grid(), &test)?;
        Ok::<_, Error>((c, h, m))
    });
    let mut sets = [
        TrainedNets { nets: vec![], histories: vec![], test_mse: vec![] },
        TrainedNets { nets: vec![], histories: vec![], test_mse: vec![] },
    ];
    for (j, r) in results.into_iter().enumerate() {
        let (c, h, m) = r?;
        let t = &mut sets[j / k];
        t.nets.push(c);
        t.histories.push(h);
        t.test_mse.push(m);
    }
    let [truth_trained, analysis_trained] = sets;
    Ok(OfflineOutcome { dataset_run: run, truth_trained, analysis_trained })
}

/// Net for repetition `rep`: repetitions are spread evenly over the trained nets.
pub fn net_for(nets: &[ColumnCorrector], rep: usize) -> Option<&ColumnCorrector> {
    if nets.is_empty() {
        None
    } else {
        nets.get(rep % nets.len())
    }
}

/// All repetitions of one variant. `nets` are the offline nets (SC-NNa ones for NN).
pub fn assimilate(
    cfg: &RunConfig,
    models: &Models,
    net: &ObsNetwork,
    kind: VariantKind,
    truth: &Truth,
    obs: &ObsArchive,
    nets: &[ColumnCorrector],
    jobs: usize,
) -> Result<Vec<DaRun>> {
    let plan = cfg.plan(kind);
    plan.validate()?;
    run_jobs(jobs, plan.repetitions, |rep| {
        let corr = if kind.uses_net() { net_for(nets, rep) } else { None };
        let s = setup(cfg, models, net, corr);
        let bg = initial_background(&s, &plan, rep, truth)?;
        run_cycled_da(&s, &plan, rep, truth, obs, bg)
    })
    .into_iter()
    .collect()
}

/// Forecasts from every kept analysis of every repetition.
#[allow(clippy::too_many_arguments)]
pub fn forecasts(
    cfg: &RunConfig,
    models: &Models,
    net: &ObsNetwork,
    kind: VariantKind,
    policy: UpdatePolicy,
    days: usize,
    runs: &[DaRun],
    nets: &[ColumnCorrector],
    truth: &Truth,
    jobs: usize,
) -> Result<Vec<Vec<ForecastRecord>>> {
    let plan = ExperimentPlan { policy, forecast_days: days, ..cfg.plan(kind) };
    run_jobs(jobs, runs.len(), |rep| {
        let corr = if kind.uses_net() { net_for(nets, rep) } else { None };
        let s = setup(cfg, models, net, corr);
        run_forecast_suite(&s, &plan, rep, &runs[rep].records, truth)
    })
    .into_iter()
    .collect()
}
