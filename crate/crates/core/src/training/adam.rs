use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::{ad_cached, forward_cached, init_weights, work_len};
use crate::nn::{ColumnCorrector, NetSpec, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 1024,
            max_epochs: 1024,
            patience: 256,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.learning_rate) || !pos(self.epsilon) || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(format!("training settings must be positive, got {self:?}")));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam decay rates must lie in [0, 1)".into()));
        }
        if self.patience == 0 || self.patience >= self.max_epochs {
            return Err(Error::Config(format!(
                "patience must lie in [1, max_epochs), got {} with {} epochs",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub event: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub stopped_early: bool,
}

impl TrainingHistory {
    /// `epoch,train_mse,val_mse,event` table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_mse,val_mse,event\n");
        for e in &self.epochs {
            let _ =
                writeln!(s, "{},{:.16e},{:.16e},{}", e.epoch, e.train_mse, e.val_mse, e.event.as_deref().unwrap_or(""));
        }
        s
    }
}

/// Mean squared error of `p` over standardised samples.
pub fn mse(spec: &NetSpec, p: &[f64], xs: &[[f64; 4]], ys: &[[f64; 2]]) -> f64 {
    mse_generic(spec, p, xs, ys)
}

fn mse_generic<const I: usize, const O: usize>(spec: &NetSpec, p: &[f64], xs: &[[f64; I]], ys: &[[f64; O]]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let cl = spec.cache_len();
    let mut acts = vec![0.0; cl];
    let mut s = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        forward_cached(spec, p, x, &mut acts);
        s += acts[cl - O..].iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    s / (xs.len() * O) as f64
}

/// Adam on standardised samples with early stopping on the validation MSE.
/// Returns the best-validation weights.
pub fn adam_fit<const I: usize, const O: usize>(
    spec: &NetSpec,
    init: WeightVector,
    train: (&[[f64; I]], &[[f64; O]]),
    val: (&[[f64; I]], &[[f64; O]]),
    cfg: &AdamConfig,
) -> Result<(WeightVector, TrainingHistory)> {
    cfg.validate()?;
    init.check(spec)?;
    if spec.input_width() != I || spec.output_width() != O {
        return Err(Error::Config(format!("network {} does not fit {I} inputs and {O} outputs", spec.to_text())));
    }
    let (xs, ys) = train;
    if xs.is_empty() || val.0.is_empty() {
        return Err(Error::Insufficient("empty training or validation set".into()));
    }
    let np = spec.n_params();
    let cl = spec.cache_len();
    let mut p = init.0;
    let mut m = vec![0.0; np];
    let mut v = vec![0.0; np];
    let mut grad = vec![0.0; np];
    let mut acts = vec![0.0; cl];
    let mut work = vec![0.0; work_len(spec)];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut hist = TrainingHistory { best_val_mse: f64::INFINITY, ..Default::default() };
    let mut best = p.clone();
    let mut t = 0i32;
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / (batch.len() * O) as f64;
            let mut dyt = [0.0; O];
            for &k in batch {
                forward_cached(spec, &p, &xs[k], &mut acts);
                for o in 0..O {
                    let e = acts[cl - O + o] - ys[k][o];
                    sse += e * e;
                    dyt[o] = scale * e;
                }
                ad_cached(spec, &p, &acts, &dyt, None, Some(&mut grad), &mut work);
            }
            t += 1;
            let c1 = 1.0 - cfg.beta1.powi(t);
            let c2 = 1.0 - cfg.beta2.powi(t);
            for j in 0..np {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
                p[j] -= cfg.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + cfg.epsilon);
            }
        }
        let train_mse = sse / (xs.len() * O) as f64;
        let val_mse = mse_generic(spec, &p, val.0, val.1);
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::Training { epoch, reason: format!("loss became {train_mse} (validation {val_mse})") });
        }
        let mut rec = EpochRecord { epoch, train_mse, val_mse, event: None };
        if val_mse < hist.best_val_mse {
            hist.best_val_mse = val_mse;
            hist.best_epoch = epoch;
            best.copy_from_slice(&p);
        } else if epoch - hist.best_epoch >= cfg.patience {
            rec.event = Some(format!("early_stop restore_epoch={}", hist.best_epoch));
            hist.epochs.push(rec);
            hist.stopped_early = true;
            break;
        }
        hist.epochs.push(rec);
    }
    Ok((WeightVector(best), hist))
}

/// Train a column corrector on `ds` from Glorot-initialised weights.
pub fn adam_train(ds: &Dataset, spec: &NetSpec, cfg: &AdamConfig) -> Result<(ColumnCorrector, TrainingHistory)> {
    let (xs, ys) = ds.normalized(ds.train_pairs())?;
    let (xv, yv) = ds.normalized(ds.validation_pairs())?;
    let init = init_weights(spec, cfg.seed);
    let (w, hist) = adam_fit(spec, init, (&xs, &ys), (&xv, &yv), cfg)?;
    Ok((ColumnCorrector::new(spec.clone(), w, ds.norm.clone())?, hist))
}
