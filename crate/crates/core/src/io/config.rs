use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cov::{CovarianceConfig, ObsNetwork};
use crate::error::{Error, Result};
use crate::experiments::{ExperimentPlan, TruthConfig, UpdatePolicy, VariantKind};
use crate::nn::NetSpec;
use crate::qg::{Grid, QgConfig};
use crate::training::AdamConfig;
use crate::var::MinimizerConfig;

/// Everything one command needs, read from a single TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub models: ModelsConfig,
    #[serde(default)]
    pub truth: TruthSection,
    #[serde(default)]
    pub observations: ObsSection,
    #[serde(default)]
    pub covariance: CovarianceConfig,
    #[serde(default)]
    pub minimizer: MinimizerConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub inputs: InputsSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: default_output(),
            models: ModelsConfig::default(),
            truth: TruthSection::default(),
            observations: ObsSection::default(),
            covariance: CovarianceConfig::default(),
            minimizer: MinimizerConfig::default(),
            experiment: ExperimentSection::default(),
            training: TrainingSection::default(),
            inputs: InputsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelsConfig {
    #[serde(default = "QgConfig::reference")]
    pub truth: QgConfig,
    #[serde(default = "QgConfig::perturbed")]
    pub assimilating: QgConfig,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self { truth: QgConfig::reference(), assimilating: QgConfig::perturbed() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthSection {
    pub relax_days: usize,
    pub perturbation_std: f64,
    pub sample_seconds: f64,
    /// Windows of truth to produce; by default what the experiment needs.
    pub days: Option<usize>,
}

impl Default for TruthSection {
    fn default() -> Self {
        let t = TruthConfig::default();
        Self {
            relax_days: t.relax_days,
            perturbation_std: t.perturbation_std,
            sample_seconds: t.sample_seconds,
            days: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObsSection {
    /// `id,x,y,layer` table; the bundled network when absent.
    pub network: Option<PathBuf>,
    /// Use this many Halton locations instead of a network file.
    pub count: Option<usize>,
    pub interval_seconds: f64,
    pub first_offset_seconds: f64,
    pub window_seconds: f64,
}

impl Default for ObsSection {
    fn default() -> Self {
        let n = ObsNetwork::default_network();
        Self {
            network: None,
            count: None,
            interval_seconds: n.interval_seconds,
            first_offset_seconds: n.first_offset_seconds,
            window_seconds: n.window_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub variants: Vec<VariantKind>,
    pub total_cycles: usize,
    pub spin_up: usize,
    pub repetitions: usize,
    /// Truth window of the first repetition; defaults to just after the training period.
    pub first_cycle: Option<usize>,
    pub rep_stride: usize,
    pub forecast_days: usize,
    pub policy: UpdatePolicy,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            variants: VariantKind::ALL.to_vec(),
            total_cycles: 72,
            spin_up: 8,
            repetitions: 8,
            first_cycle: None,
            rep_stride: 8,
            forecast_days: 32,
            policy: UpdatePolicy::Daily,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// Length of the SC run that provides analysis increments.
    pub dataset_cycles: usize,
    pub dataset_spin_up: usize,
    pub n_pairs: usize,
    pub n_test_pairs: usize,
    /// One network per seed, for each of the truth and analysis datasets.
    pub net_seeds: Vec<u64>,
    pub net: String,
    pub adam: AdamConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            dataset_cycles: 300,
            dataset_spin_up: 16,
            n_pairs: 128,
            n_test_pairs: 256,
            net_seeds: vec![0, 1, 2],
            net: NetSpec::column_default().to_text(),
            adam: AdamConfig { max_epochs: 96, patience: 24, ..AdamConfig::default() },
        }
    }
}

/// Upstream artifact directories; each defaults to a subdirectory of the output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputsSection {
    pub truth: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub forecasts: Option<PathBuf>,
}

impl RunConfig {
    /// Parse and validate. Errors name the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_note(text, e.span())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::data(path, e.to_string()))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let key = |k: &str, e: Error| match e {
            Error::Config(m) => Error::Config(format!("{k}: {m}")),
            e => e,
        };
        self.models.truth.validate().map_err(|e| key("models.truth", e))?;
        self.models.assimilating.validate().map_err(|e| key("models.assimilating", e))?;
        let (t, a) = (&self.models.truth, &self.models.assimilating);
        if (t.nx, t.ny) != (a.nx, a.ny) {
            return Err(Error::Config("models: truth and assimilating grids differ".into()));
        }
        self.truth_config().validate().map_err(|e| key("truth", e))?;
        self.covariance.validate().map_err(|e| key("covariance", e))?;
        self.minimizer.validate().map_err(|e| key("minimizer", e))?;
        self.training.adam.validate().map_err(|e| key("training.adam", e))?;
        NetSpec::from_text(&self.training.net).map_err(|e| key("training.net", e))?;
        let o = &self.observations;
        if !(o.interval_seconds > 0.0 && o.first_offset_seconds >= 0.0 && o.window_seconds > 0.0) {
            return Err(Error::Config("observations: timings must be positive".into()));
        }
        if self.experiment.variants.is_empty() {
            return Err(Error::Config("experiment.variants: list is empty".into()));
        }
        for v in &self.experiment.variants {
            self.plan(*v).validate().map_err(|e| key("experiment", e))?;
        }
        let tr = &self.training;
        if tr.net_seeds.is_empty() {
            return Err(Error::Config("training.net_seeds: list is empty".into()));
        }
        if tr.n_pairs < 2 || tr.dataset_spin_up + tr.n_pairs + 1 > tr.dataset_cycles {
            return Err(Error::Config(format!(
                "training.n_pairs: {} pairs after {} spin-up cycles need more than {} dataset cycles",
                tr.n_pairs, tr.dataset_spin_up, tr.dataset_cycles
            )));
        }
        if tr.n_test_pairs == 0 {
            return Err(Error::Config("training.n_test_pairs: must be positive".into()));
        }
        Ok(())
    }

    pub fn truth_config(&self) -> TruthConfig {
        TruthConfig {
            relax_days: self.truth.relax_days,
            perturbation_std: self.truth.perturbation_std,
            sample_seconds: self.truth.sample_seconds,
            window_seconds: self.observations.window_seconds,
        }
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.models.truth.nx, self.models.truth.ny)
    }

    pub fn plan(&self, variant: VariantKind) -> ExperimentPlan {
        let e = &self.experiment;
        ExperimentPlan {
            variant,
            total_cycles: e.total_cycles,
            spin_up: e.spin_up,
            repetitions: e.repetitions,
            first_cycle: e.first_cycle.unwrap_or(self.training.dataset_cycles),
            rep_stride: e.rep_stride,
            seed: self.seed,
            forecast_days: e.forecast_days,
            policy: e.policy,
        }
    }

    /// Truth windows needed by training, assimilation and forecasts.
    pub fn truth_days(&self) -> usize {
        self.truth.days.unwrap_or_else(|| {
            let any = self.experiment.variants.first().copied().unwrap_or(VariantKind::Sc);
            self.plan(any).truth_windows_needed(true).max(self.training.dataset_cycles)
        })
    }

    pub fn net_spec(&self) -> Result<NetSpec> {
        NetSpec::from_text(&self.training.net)
    }

    /// The observing network with this config's timings.
    pub fn network(&self) -> Result<ObsNetwork> {
        let o = &self.observations;
        let mut net = match (&o.network, o.count) {
            (Some(p), _) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::data(p, e.to_string()))?;
                ObsNetwork::from_csv(&text).map_err(|e| Error::data(p, e.to_string()))?
            }
            (None, Some(n)) => ObsNetwork::halton(self.grid(), n),
            (None, None) => ObsNetwork::default_network(),
        };
        net.interval_seconds = o.interval_seconds;
        net.first_offset_seconds = o.first_offset_seconds;
        net.window_seconds = o.window_seconds;
        net.validate(self.grid()).map_err(|e| Error::Config(format!("observations.network: {e}")))?;
        Ok(net)
    }

    pub fn input_dir(&self, which: &str) -> PathBuf {
        let i = &self.inputs;
        let given = match which {
            "truth" => &i.truth,
            "observations" => &i.observations,
            "weights" => &i.weights,
            "records" => &i.records,
            "forecasts" => &i.forecasts,
            _ => &None,
        };
        given.clone().unwrap_or_else(|| self.output.join(which))
    }
}

fn span_note(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(s) => {
            let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}
