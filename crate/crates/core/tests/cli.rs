mod common;

use std::path::Path;

use common::*;
use nnvar::io::{Checkpoint, Manifest, RunConfig};

fn run_all(cfg_path: &Path) {
    for cmd in PIPELINE {
        assert_eq!(nnvar(cmd, cfg_path, &[]), 0, "{cmd} failed");
    }
}

#[test]
fn pipeline_outputs_and_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = mini_config(&out);
    let p = write_config(tmp.path(), &cfg);
    run_all(&p);
    for cmd in PIPELINE {
        let m = Manifest::read(&out.join(Manifest::file_name(cmd))).unwrap();
        assert!(!m.outputs.is_empty(), "{cmd}");
        for d in &m.outputs {
            let bytes = std::fs::read(out.join(&d.path)).unwrap();
            assert_eq!(nnvar::io::sha256_hex(&bytes), d.sha256);
        }
    }
    let listed: usize =
        PIPELINE.iter().map(|c| Manifest::read(&out.join(Manifest::file_name(c))).unwrap().outputs.len()).sum();
    assert_eq!(listed, tree(&out).len(), "manifests must list all and only the written files");
    let summary = std::fs::read_to_string(out.join("report/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    assert!(summary.starts_with("variant,repetitions,fg_rmse_mean,fg_rmse_std,an_rmse_mean,an_rmse_std\nSC,2,"));
    let rows = std::fs::read_to_string(out.join("records/WC/rep_01.csv")).unwrap();
    assert_eq!(rows.lines().count(), 5);
    let traj = Checkpoint::read(&out.join("records/NN/rep_00_p.chk")).unwrap();
    assert_eq!(traj.shape, vec![4, 386]);
    assert!(out.join("report/rmse_vs_lead.svg").exists());
}

#[test]
fn truth_with_zero_days_writes_one_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = mini_config(&tmp.path().join("out"));
    cfg.truth.days = Some(0);
    let p = write_config(tmp.path(), &cfg);
    assert_eq!(nnvar("truth", &p, &[]), 0);
    let m = Manifest::read(&cfg.output.join("manifest_truth.toml")).unwrap();
    assert_eq!(m.outputs.len(), 1);
    let ck = Checkpoint::read(&cfg.output.join(&m.outputs[0].path)).unwrap();
    assert_eq!(ck.shape, vec![1, 2, 6, 8]);
}

#[test]
fn zero_kept_cycles_give_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = mini_config(&tmp.path().join("out"));
    cfg.experiment.variants = vec![nnvar::experiments::VariantKind::Sc];
    cfg.experiment.spin_up = cfg.experiment.total_cycles;
    cfg.experiment.repetitions = 1;
    cfg.experiment.first_cycle = Some(0);
    cfg.truth.days = Some(8);
    let p = write_config(tmp.path(), &cfg);
    for c in ["truth", "observe", "assimilate"] {
        assert_eq!(nnvar(c, &p, &[]), 0, "{c}");
    }
    let t = std::fs::read_to_string(cfg.output.join("records/SC/rep_00.csv")).unwrap();
    assert_eq!(t, "cycle,fg_rmse,an_rmse,cost_total,inner_iters\n");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[experiment]\nspin_upp = 1\n").unwrap();
    assert_eq!(nnvar("truth", &bad, &[]), 1);
    assert_eq!(nnvar("truth", &tmp.path().join("missing.toml"), &[]), 2);
    assert_eq!(nnvar::cli::run(["nnvar", "truth"]), 1);
    assert_eq!(nnvar::cli::run(["nnvar", "--help"]), 0);

    let mut cfg = mini_config(&tmp.path().join("out"));
    cfg.truth.days = Some(3);
    cfg.training.dataset_cycles = 3;
    cfg.training.dataset_spin_up = 0;
    cfg.training.n_pairs = 2;
    let p = write_config(tmp.path(), &cfg);
    // nothing upstream yet
    assert_eq!(nnvar("observe", &p, &[]), 2);
    assert_eq!(nnvar("truth", &p, &[]), 0);
    let f = cfg.output.join("truth/window_000001.chk");
    let mut b = std::fs::read(&f).unwrap();
    let n = b.len();
    b[n - 1] ^= 1;
    std::fs::write(&f, b).unwrap();
    assert_eq!(nnvar("observe", &p, &[]), 2);
    // numerical failure: a blown-up truth
    let mut hot = cfg.clone();
    hot.output = tmp.path().join("hot");
    hot.models.truth.jet.amplitudes = [1e4, 1e4];
    hot.models.truth.dt_seconds = 3600.0;
    let hp = tmp.path().join("hot.toml");
    nnvar::cli::write_config(&hp, &hot).unwrap();
    assert_eq!(nnvar("truth", &hp, &[]), 3);
}

#[test]
fn seed_and_output_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = mini_config(&tmp.path().join("unused"));
    cfg.truth.days = Some(1);
    let p = write_config(tmp.path(), &cfg);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(nnvar("truth", &p, &["--output", a.to_str().unwrap(), "--seed", "1"]), 0);
    assert_eq!(nnvar("truth", &p, &["--output", b.to_str().unwrap(), "--seed", "2", "--jobs", "2"]), 0);
    assert!(!tmp.path().join("unused").exists());
    assert_ne!(tree(&a), tree(&b));
}

#[test]
fn config_round_trip_through_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = mini_config(&tmp.path().join("out"));
    let p = write_config(tmp.path(), &cfg);
    assert_eq!(RunConfig::load(&p).unwrap(), cfg);
}

/// Report on the bundled sample records must match the checked-in files.
#[test]
fn report_matches_golden_files() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&data.join("sample/report.toml")).unwrap();
    cfg.inputs.records = Some(data.join("sample/records"));
    cfg.inputs.forecasts = Some(data.join("sample/forecasts"));
    cfg.output = tmp.path().to_path_buf();
    nnvar::cli::execute("report", &cfg, 1).unwrap();
    for f in ["summary.csv", "forecast_mean.csv", "rmse_vs_cycle.svg", "rmse_vs_lead.svg"] {
        let got = std::fs::read(tmp.path().join("report").join(f)).unwrap();
        let want = std::fs::read(data.join("golden").join(f)).unwrap();
        assert!(got == want, "{f} differs from the golden copy");
    }
}

#[test]
fn desk_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml");
    let cfg = RunConfig::from_toml(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(cfg.to_toml().unwrap(), RunConfig::default().to_toml().unwrap());
}
