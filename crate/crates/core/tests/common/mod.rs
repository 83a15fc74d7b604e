#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nnvar::experiments::VariantKind;
use nnvar::io::RunConfig;
use nnvar::qg::QgConfig;
use nnvar::training::AdamConfig;

/// Small end-to-end configuration on an 8×6 grid with 2 h windows.
pub fn mini_config(output: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    let mini = |base: QgConfig| {
        let mut q = base.with_grid(8, 6);
        q.jet.amplitudes = [2.0, 1.0];
        q
    };
    c.seed = 3;
    c.output = output.to_path_buf();
    c.models.truth = mini(QgConfig::reference());
    c.models.assimilating = mini(QgConfig::perturbed());
    c.truth.relax_days = 4;
    c.truth.sample_seconds = 1200.0;
    c.observations.count = Some(10);
    c.observations.interval_seconds = 2400.0;
    c.observations.first_offset_seconds = 1200.0;
    c.observations.window_seconds = 7200.0;
    c.covariance.long_length = 3.0;
    c.training.dataset_cycles = 24;
    c.training.dataset_spin_up = 4;
    c.training.n_pairs = 16;
    c.training.n_test_pairs = 8;
    c.training.net_seeds = vec![0, 1];
    c.training.adam = AdamConfig { batch_size: 256, max_epochs: 8, patience: 4, ..AdamConfig::default() };
    c.experiment.variants = VariantKind::ALL.to_vec();
    c.experiment.total_cycles = 6;
    c.experiment.spin_up = 2;
    c.experiment.repetitions = 2;
    c.experiment.rep_stride = 1;
    c.experiment.forecast_days = 2;
    c
}

pub fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let p = dir.join("run.toml");
    nnvar::cli::write_config(&p, cfg).unwrap();
    p
}

pub fn nnvar(cmd: &str, config: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["nnvar".to_string(), cmd.to_string(), "--config".into(), config.display().to_string()];
    args.extend(extra.iter().map(|s| s.to_string()));
    nnvar::cli::run(args)
}

pub const PIPELINE: [&str; 7] = ["truth", "observe", "train-offline", "assimilate", "run-online", "forecast", "report"];

/// Every file under `root` except manifests, keyed by relative path.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.file_name().unwrap().to_string_lossy().starts_with("manifest_") {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
