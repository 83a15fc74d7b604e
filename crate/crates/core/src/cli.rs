//! `nnvar <command> --config PATH [--jobs N] [--seed S] [--output DIR]`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::cov::ObsNetwork;
use crate::error::{Error, Result};
use crate::experiments::tables::{
    cycle_table, fmt_f64, forecast_table, lead_table, parse_cycle_table, parse_forecast_table, summary_table,
};
use crate::experiments::{
    aggregate, kept_rows, mean_forecast, mean_series, running_mean, CycleRecord, CycleRow, DaRun, ForecastRecord,
    ObsArchive, Truth, UpdatePolicy, VariantKind,
};
use crate::io::plot::{Chart, Series};
use crate::io::{
    parse_observations, sha256_hex, write_file, write_observations, Checkpoint, FileDigest, Manifest, RunConfig,
};
use crate::nn::{ColumnCorrector, WeightVector};
use crate::pipeline::{self, Models};
use crate::qg::QgState;

#[derive(Debug, Parser)]
#[command(name = "nnvar", version, about = "Twin experiments with NN-corrected 4D-Var on a QG channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Parallel jobs for independent repetitions.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the configured global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spin up and run the reference model.
    Truth(Common),
    /// Simulate observations from the truth.
    Observe(Common),
    /// Cycled assimilation for the configured non-online variants.
    Assimilate(Common),
    /// Build the datasets and train the offline corrections.
    TrainOffline(Common),
    /// Cycled assimilation with online learning of the net weights.
    RunOnline(Common),
    /// Forecasts from the stored analyses.
    Forecast(Common),
    /// Summary tables and plots.
    Report(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Truth(c) => ("truth", c),
            Command::Observe(c) => ("observe", c),
            Command::Assimilate(c) => ("assimilate", c),
            Command::TrainOffline(c) => ("train-offline", c),
            Command::RunOnline(c) => ("run-online", c),
            Command::Forecast(c) => ("forecast", c),
            Command::Report(c) => ("report", c),
        }
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (name, common) = cli.command.parts();
    let result = RunConfig::load(&common.config).and_then(|mut cfg| {
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        if let Some(o) = &common.output {
            cfg.output = o.clone();
        }
        execute(name, &cfg, common.jobs.max(1))
    });
    match result {
        Ok(m) => {
            log::info!("{name}: wrote {} files", m.outputs.len());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Tracks what a command reads and writes, for the manifest.
struct Ledger {
    root: PathBuf,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    manifests: BTreeMap<PathBuf, Option<Manifest>>,
}

impl Ledger {
    fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf(), inputs: Vec::new(), outputs: Vec::new(), manifests: BTreeMap::new() }
    }

    fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
        let rel = rel.as_ref();
        write_file(&self.root.join(rel), bytes)?;
        self.outputs.push(FileDigest { path: rel.to_path_buf(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    /// Read an upstream artifact from `dir`, checking it against the manifest
    /// of `producer` in the parent directory when that manifest exists.
    fn read(&mut self, dir: &Path, file: &str, producer: &str) -> Result<Vec<u8>> {
        let path = dir.join(file);
        let bytes = std::fs::read(&path).map_err(|e| Error::data(&path, e.to_string()))?;
        let root = dir.parent().unwrap_or(Path::new("")).to_path_buf();
        let mpath = root.join(Manifest::file_name(producer));
        if !self.manifests.contains_key(&mpath) {
            let m = if mpath.exists() { Some(Manifest::read(&mpath)?) } else { None };
            self.manifests.insert(mpath.clone(), m);
        }
        let digest = sha256_hex(&bytes);
        if let Some(m) = &self.manifests[&mpath] {
            match m.digest_of(&root, &path) {
                Some(d) if d == digest => {}
                Some(_) => return Err(Error::data(&path, format!("digest differs from {}", mpath.display()))),
                None => return Err(Error::data(&path, format!("not listed in {}", mpath.display()))),
            }
        }
        self.inputs.push(FileDigest { path, sha256: digest });
        Ok(bytes)
    }

    fn read_text(&mut self, dir: &Path, file: &str, producer: &str) -> Result<String> {
        let p = dir.join(file);
        String::from_utf8(self.read(dir, file, producer)?).map_err(|_| Error::data(p, "not UTF-8"))
    }

    fn read_checkpoint(&mut self, dir: &Path, file: &str, producer: &str) -> Result<Checkpoint> {
        let b = self.read(dir, file, producer)?;
        Checkpoint::from_bytes(&b, &dir.join(file))
    }
}

/// Run one command and write its manifest.
pub fn execute(command: &str, cfg: &RunConfig, jobs: usize) -> Result<Manifest> {
    cfg.validate()?;
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let mut led = Ledger::new(&cfg.output);
    match command {
        "truth" => cmd_truth(cfg, &mut led)?,
        "observe" => cmd_observe(cfg, &mut led)?,
        "assimilate" => cmd_assimilate(cfg, &mut led, jobs, false)?,
        "train-offline" => cmd_train_offline(cfg, &mut led, jobs)?,
        "run-online" => cmd_assimilate(cfg, &mut led, jobs, true)?,
        "forecast" => cmd_forecast(cfg, &mut led, jobs)?,
        "report" => cmd_report(cfg, &mut led)?,
        _ => return Err(Error::Config(format!("unknown command `{command}`"))),
    }
    let m = Manifest {
        tool: format!("nnvar {}", env!("CARGO_PKG_VERSION")),
        command: command.to_string(),
        config_sha256: sha256_hex(cfg.to_toml()?.as_bytes()),
        started_utc: started.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        inputs: led.inputs,
        outputs: led.outputs,
    };
    write_file(&cfg.output.join(Manifest::file_name(command)), m.to_toml()?.as_bytes())?;
    Ok(m)
}

fn window_file(c: usize, ext: &str) -> String {
    format!("window_{c:06}.{ext}")
}

fn cmd_truth(cfg: &RunConfig, led: &mut Ledger) -> Result<()> {
    let models = Models::new(cfg)?;
    let days = cfg.truth_days();
    let truth = pipeline::make_truth(cfg, &models, days)?;
    let spw = truth.samples_per_window();
    for c in 0..=days {
        let end = ((c + 1) * spw).min(truth.states.len());
        let mut ck = Checkpoint::from_states("truth", &truth.states[c * spw..end])?;
        if ck.get("time_step_seconds").is_none() {
            ck = ck.with("time_step_seconds", fmt_f64(truth.sample_seconds));
        }
        led.write(Path::new("truth").join(window_file(c, "chk")), &ck.to_bytes())?;
    }
    Ok(())
}

fn load_truth(cfg: &RunConfig, led: &mut Ledger) -> Result<Truth> {
    let dir = cfg.input_dir("truth");
    let mut states: Vec<QgState> = Vec::new();
    let mut c = 0;
    while dir.join(window_file(c, "chk")).exists() {
        let f = window_file(c, "chk");
        let ck = led.read_checkpoint(&dir, &f, "truth")?;
        states.extend(ck.states(&dir.join(&f))?);
        c += 1;
    }
    if states.is_empty() {
        return Err(Error::data(dir.join(window_file(0, "chk")), "no truth checkpoints"));
    }
    let t = Truth { sample_seconds: cfg.truth.sample_seconds, window_seconds: cfg.observations.window_seconds, states };
    let spw = t.samples_per_window();
    for (k, s) in t.states.iter().enumerate() {
        if (s.valid_time - k as f64 * t.sample_seconds).abs() > 1e-6 {
            return Err(Error::data(
                dir.join(window_file(k / spw, "chk")),
                "truth sampling differs from the configuration",
            ));
        }
        if s.grid != cfg.grid() {
            return Err(Error::data(
                dir.join(window_file(k / spw, "chk")),
                "truth grid differs from the configuration",
            ));
        }
    }
    Ok(t)
}

fn cmd_observe(cfg: &RunConfig, led: &mut Ledger) -> Result<()> {
    let net = cfg.network()?;
    let truth = load_truth(cfg, led)?;
    let obs = pipeline::observe(cfg, &net, &truth)?;
    led.write("observations/network.csv", net.to_csv().as_bytes())?;
    for (k, w) in obs.windows.iter().enumerate() {
        led.write(
            Path::new("observations").join(window_file(obs.first_cycle + k, "csv")),
            write_observations(w, &net).as_bytes(),
        )?;
    }
    Ok(())
}

fn load_obs(cfg: &RunConfig, led: &mut Ledger, net: &ObsNetwork, n: usize) -> Result<ObsArchive> {
    let dir = cfg.input_dir("observations");
    let windows = (0..n)
        .map(|c| {
            let f = window_file(c, "csv");
            let text = led.read_text(&dir, &f, "observe")?;
            parse_observations(&text, net, c as f64 * cfg.observations.window_seconds, &dir.join(&f))
        })
        .collect::<Result<_>>()?;
    Ok(ObsArchive { first_cycle: 0, windows })
}

fn net_file(kind: &str, seed: u64) -> String {
    format!("{kind}_seed{seed}.chk")
}

fn cmd_train_offline(cfg: &RunConfig, led: &mut Ledger, jobs: usize) -> Result<()> {
    let models = Models::new(cfg)?;
    let net = cfg.network()?;
    let truth = load_truth(cfg, led)?;
    let obs = load_obs(cfg, led, &net, cfg.training.dataset_cycles)?;
    let off = pipeline::train_offline(cfg, &models, &net, &truth, &obs, jobs)?;
    let rows: Vec<CycleRow> = off.dataset_run.records.iter().map(CycleRow::from).collect();
    led.write("weights/dataset_cycles.csv", cycle_table(&rows).as_bytes())?;
    led.write("weights/dataset_minimizer.log", off.dataset_run.log.as_bytes())?;
    let mut table = String::from("kind,seed,n_pairs,normalized_test_mse\n");
    for (kind, set) in [("nnt", &off.truth_trained), ("nna", &off.analysis_trained)] {
        for (k, seed) in cfg.training.net_seeds.iter().enumerate() {
            led.write(
                Path::new("weights").join(net_file(kind, *seed)),
                &Checkpoint::from_corrector(&set.nets[k]).to_bytes(),
            )?;
            led.write(format!("weights/history_{kind}_seed{seed}.csv"), set.histories[k].to_csv().as_bytes())?;
            table += &format!("{kind},{seed},{},{}\n", cfg.training.n_pairs, fmt_f64(set.test_mse[k]));
        }
    }
    led.write("weights/offline_mse.csv", table.as_bytes())
}

/// Offline nets feeding `kind`: truth-trained for SC-NNt, analysis-trained otherwise.
fn load_nets(cfg: &RunConfig, led: &mut Ledger, kind: VariantKind) -> Result<Vec<ColumnCorrector>> {
    let tag = match kind {
        VariantKind::ScNnt => "nnt",
        VariantKind::ScNna | VariantKind::Nn => "nna",
        _ => return Ok(Vec::new()),
    };
    let dir = cfg.input_dir("weights");
    cfg.training
        .net_seeds
        .iter()
        .map(|s| {
            let f = net_file(tag, *s);
            led.read_checkpoint(&dir, &f, "train-offline")?.corrector(&dir.join(&f))
        })
        .collect()
}

fn rep_stem(rep: usize) -> String {
    format!("rep_{rep:02}")
}

fn cmd_assimilate(cfg: &RunConfig, led: &mut Ledger, jobs: usize, online: bool) -> Result<()> {
    let kinds: Vec<VariantKind> = if online {
        vec![VariantKind::Nn]
    } else {
        cfg.experiment.variants.iter().copied().filter(|v| *v != VariantKind::Nn).collect()
    };
    let models = Models::new(cfg)?;
    let net = cfg.network()?;
    let truth = load_truth(cfg, led)?;
    let need = kinds.iter().map(|k| cfg.plan(*k).truth_windows_needed(false)).max().unwrap_or(0);
    let obs = load_obs(cfg, led, &net, need)?;
    for kind in kinds {
        let nets = load_nets(cfg, led, kind)?;
        let runs = pipeline::assimilate(cfg, &models, &net, kind, &truth, &obs, &nets, jobs)?;
        log::info!("{kind}: {} repetitions done", runs.len());
        write_runs(cfg, led, kind, &runs)?;
    }
    Ok(())
}

fn write_runs(cfg: &RunConfig, led: &mut Ledger, kind: VariantKind, runs: &[DaRun]) -> Result<()> {
    let spin = cfg.experiment.spin_up;
    let dir = Path::new("records").join(kind.name());
    for (rep, run) in runs.iter().enumerate() {
        let stem = rep_stem(rep);
        led.write(dir.join(format!("{stem}.csv")), cycle_table(&kept_rows(&run.records, spin)).as_bytes())?;
        led.write(dir.join(format!("{stem}.log")), run.log.as_bytes())?;
        let kept: Vec<&CycleRecord> = run.records.iter().filter(|r| r.cycle >= spin && !r.diverged).collect();
        if kept.is_empty() {
            continue;
        }
        let an: Vec<QgState> = kept.iter().map(|r| r.analysis.clone()).collect();
        let ck = Checkpoint::from_states("analysis", &an)?.with("first_cycle", kept[0].cycle.to_string());
        led.write(dir.join(format!("{stem}_analyses.chk")), &ck.to_bytes())?;
        if kept[0].w.is_some() {
            let w: Vec<QgState> = kept
                .iter()
                .map(|r| QgState {
                    grid: r.analysis.grid,
                    psi: r.w.clone().unwrap(),
                    valid_time: r.analysis.valid_time,
                })
                .collect();
            led.write(dir.join(format!("{stem}_w.chk")), &Checkpoint::from_states("w", &w)?.to_bytes())?;
        }
        if let Some(p0) = &kept[0].p {
            let data: Vec<f64> = kept.iter().flat_map(|r| r.p.as_ref().unwrap().0.iter().copied()).collect();
            let ck =
                Checkpoint::new("weight_trajectory", vec![kept.len(), p0.len()], kept[0].analysis.valid_time, data)
                    .with("first_cycle", kept[0].cycle.to_string());
            led.write(dir.join(format!("{stem}_p.chk")), &ck.to_bytes())?;
        }
    }
    Ok(())
}

/// Kept analyses of one repetition, rebuilt from the record files.
fn load_analyses(cfg: &RunConfig, led: &mut Ledger, kind: VariantKind, rep: usize) -> Result<Vec<CycleRecord>> {
    let dir = cfg.input_dir("records").join(kind.name());
    let stem = rep_stem(rep);
    let producer = if kind == VariantKind::Nn { "run-online" } else { "assimilate" };
    let read = |led: &mut Ledger, f: String| -> Result<Checkpoint> {
        let bytes = led.read_nested(&dir, &f, producer)?;
        Checkpoint::from_bytes(&bytes, &dir.join(&f))
    };
    let csv = dir.join(format!("{stem}.csv"));
    let rows = parse_cycle_table(
        &String::from_utf8(led.read_nested(&dir, &format!("{stem}.csv"), producer)?)
            .map_err(|_| Error::data(&csv, "not UTF-8"))?,
        &csv,
    )?;
    let kept: Vec<CycleRow> = rows.into_iter().filter(|r| r.fg_rmse.is_finite() && r.an_rmse.is_finite()).collect();
    if kept.is_empty() {
        return Ok(Vec::new());
    }
    let af = format!("{stem}_analyses.chk");
    let an = read(led, af.clone())?.states(&dir.join(&af))?;
    let w = if kind == VariantKind::Wc {
        let f = format!("{stem}_w.chk");
        Some(read(led, f.clone())?.states(&dir.join(&f))?)
    } else {
        None
    };
    let p = if kind == VariantKind::Nn {
        let f = format!("{stem}_p.chk");
        let ck = read(led, f.clone())?;
        let n = *ck.shape.get(1).ok_or_else(|| Error::data(dir.join(&f), "weight trajectory must be 2-D"))?;
        Some(ck.data.chunks_exact(n).map(|c| WeightVector(c.to_vec())).collect::<Vec<_>>())
    } else {
        None
    };
    if an.len() != kept.len() {
        return Err(Error::data(dir.join(&af), format!("{} analyses for {} kept cycles", an.len(), kept.len())));
    }
    Ok(kept
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let mut r = CycleRecord::new(row.cycle, an[k].clone(), an[k].clone());
            r.fg_rmse = row.fg_rmse;
            r.an_rmse = row.an_rmse;
            r.w = w.as_ref().map(|w| w[k].psi.clone());
            r.p = p.as_ref().map(|p| p[k].clone());
            r
        })
        .collect())
}

impl Ledger {
    /// Like [`Ledger::read`] for files in `records/<variant>/`, whose manifest sits two levels up.
    fn read_nested(&mut self, dir: &Path, file: &str, producer: &str) -> Result<Vec<u8>> {
        let parent = dir.parent().unwrap_or(Path::new(""));
        let rel = Path::new(dir.file_name().unwrap_or_default()).join(file);
        self.read(parent, rel.to_str().unwrap_or(file), producer)
    }
}

fn policy_tag(p: UpdatePolicy) -> &'static str {
    match p {
        UpdatePolicy::Daily => "daily",
        UpdatePolicy::Frozen => "frozen",
    }
}

fn cmd_forecast(cfg: &RunConfig, led: &mut Ledger, jobs: usize) -> Result<()> {
    let models = Models::new(cfg)?;
    let net = cfg.network()?;
    let truth = load_truth(cfg, led)?;
    let policy = cfg.experiment.policy;
    for &kind in &cfg.experiment.variants {
        let nets = load_nets(cfg, led, kind)?;
        let reps: Vec<Vec<CycleRecord>> =
            (0..cfg.experiment.repetitions).map(|r| load_analyses(cfg, led, kind, r)).collect::<Result<_>>()?;
        let runs: Vec<DaRun> =
            reps.into_iter().map(|records| DaRun { records, log: String::new(), diverged: false }).collect();
        let fc = pipeline::forecasts(
            cfg,
            &models,
            &net,
            kind,
            policy,
            cfg.experiment.forecast_days,
            &runs,
            &nets,
            &truth,
            jobs,
        )?;
        let tag = policy_tag(policy);
        for (rep, f) in fc.iter().enumerate() {
            led.write(
                Path::new("forecasts").join(kind.name()).join(format!("{}_{tag}.csv", rep_stem(rep))),
                forecast_table(f).as_bytes(),
            )?;
        }
    }
    Ok(())
}

fn cmd_report(cfg: &RunConfig, led: &mut Ledger) -> Result<()> {
    let e = &cfg.experiment;
    let window = e.spin_up..e.total_cycles;
    let mut summaries = Vec::new();
    let mut cycle_series = Vec::new();
    let mut lead_cols: Vec<(String, Vec<f64>)> = Vec::new();
    let mut leads: Option<Vec<f64>> = None;
    let rdir = cfg.input_dir("records");
    let fdir = cfg.input_dir("forecasts");
    for &kind in &e.variants {
        let vdir = rdir.join(kind.name());
        if !vdir.exists() {
            continue;
        }
        let producer = if kind == VariantKind::Nn { "run-online" } else { "assimilate" };
        let mut reps = Vec::new();
        for rep in 0..e.repetitions {
            let f = format!("{}.csv", rep_stem(rep));
            let bytes = led.read_nested(&vdir, &f, producer)?;
            let text = String::from_utf8(bytes).map_err(|_| Error::data(vdir.join(&f), "not UTF-8"))?;
            reps.push(parse_cycle_table(&text, &vdir.join(&f))?);
        }
        summaries.push(aggregate(kind.name(), &reps, window.clone())?);
        let fg: Vec<Vec<f64>> = reps.iter().map(|r| r.iter().map(|x| x.fg_rmse).collect()).collect();
        let shortest = fg.iter().map(Vec::len).min().unwrap_or(0);
        let trimmed: Vec<&[f64]> = fg.iter().map(|v| &v[..shortest]).collect();
        let m = mean_series(&trimmed)?;
        let x: Vec<f64> = reps[0].iter().take(shortest).map(|r| r.cycle as f64).collect();
        cycle_series.push(Series { name: kind.name().to_string(), x, y: running_mean(&m, 32) });
        let vf = fdir.join(kind.name());
        let mut recs: Vec<ForecastRecord> = Vec::new();
        for rep in 0..e.repetitions {
            let f = format!("{}_{}.csv", rep_stem(rep), policy_tag(e.policy));
            if !vf.join(&f).exists() {
                continue;
            }
            let text = String::from_utf8(led.read_nested(&vf, &f, "forecast")?)
                .map_err(|_| Error::data(vf.join(&f), "not UTF-8"))?;
            recs.extend(parse_forecast_table(&text, &vf.join(&f))?);
        }
        if !recs.is_empty() {
            let m = mean_forecast(&recs)?;
            let l: Vec<f64> = (0..m.len()).map(|k| recs[0].lead_hours(k)).collect();
            if leads.as_ref().is_some_and(|x| x.len() != l.len()) {
                return Err(Error::data(&vf, "forecast lengths differ between variants"));
            }
            leads = Some(l);
            lead_cols.push((kind.name().to_string(), m));
        }
    }
    if summaries.is_empty() {
        return Err(Error::data(&rdir, "no record tables for the configured variants"));
    }
    led.write("report/summary.csv", summary_table(&summaries).as_bytes())?;
    let chart = Chart {
        title: "First-guess RMSE, 32-cycle running mean".into(),
        x_label: "cycle".into(),
        y_label: "RMSE".into(),
        series: cycle_series,
    };
    led.write("report/rmse_vs_cycle.svg", chart.to_svg().as_bytes())?;
    if let Some(l) = leads {
        let cols: Vec<(&str, Vec<f64>)> = lead_cols.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
        led.write("report/forecast_mean.csv", lead_table(&l, &cols).as_bytes())?;
        let days: Vec<f64> = l.iter().map(|h| h / 24.0).collect();
        let chart = Chart {
            title: "Forecast RMSE".into(),
            x_label: "lead time (days)".into(),
            y_label: "RMSE".into(),
            series: lead_cols.into_iter().map(|(name, y)| Series { name, x: days.clone(), y }).collect(),
        };
        led.write("report/rmse_vs_lead.svg", chart.to_svg().as_bytes())?;
    }
    Ok(())
}

/// Write `cfg` where a command can read it back.
pub fn write_config(path: &Path, cfg: &RunConfig) -> Result<()> {
    write_file(path, cfg.to_toml()?.as_bytes())
}
