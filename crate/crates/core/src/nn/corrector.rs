//! Column-wise model-error corrector: the same small network applied to every
//! grid column, mapping local predictors to the forcing of both layers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::net::{ad_cached, forward_cached, tl_cached, work_len, NetSpec, WeightVector};
use crate::error::{check_len, Error, Result};
use crate::qg::Grid;

pub const N_PREDICTORS: usize = 4;
pub const N_OUTPUTS: usize = 2;

/// Standardisation of network inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub in_mean: Vec<f64>,
    pub in_std: Vec<f64>,
    pub out_mean: Vec<f64>,
    pub out_std: Vec<f64>,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            in_mean: vec![0.0; N_PREDICTORS],
            in_std: vec![1.0; N_PREDICTORS],
            out_mean: vec![0.0; N_OUTPUTS],
            out_std: vec![1.0; N_OUTPUTS],
        }
    }

    /// Column statistics of predictors and targets. A zero spread is replaced
    /// by one so that constant columns pass through unscaled.
    pub fn fit(inputs: &[[f64; N_PREDICTORS]], targets: &[[f64; N_OUTPUTS]]) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::Insufficient(format!("{} inputs for {} targets", inputs.len(), targets.len())));
        }
        fn stats<const K: usize>(rows: &[[f64; K]]) -> (Vec<f64>, Vec<f64>) {
            let n = rows.len() as f64;
            let mut mean = vec![0.0; K];
            for r in rows {
                for k in 0..K {
                    mean[k] += r[k];
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; K];
            for r in rows {
                for k in 0..K {
                    var[k] += (r[k] - mean[k]).powi(2);
                }
            }
            let std = var
                .iter()
                .map(|v| {
                    let s = (v / n).sqrt();
                    if s > 1e-300 {
                        s
                    } else {
                        1.0
                    }
                })
                .collect();
            (mean, std)
        }
        let (in_mean, in_std) = stats(inputs);
        let (out_mean, out_std) = stats(targets);
        Ok(Self { in_mean, in_std, out_mean, out_std })
    }

    pub fn validate(&self) -> Result<()> {
        check_len("input mean", N_PREDICTORS, self.in_mean.len())?;
        check_len("input std", N_PREDICTORS, self.in_std.len())?;
        check_len("output mean", N_OUTPUTS, self.out_mean.len())?;
        check_len("output std", N_OUTPUTS, self.out_std.len())?;
        let all = self.in_mean.iter().chain(&self.in_std).chain(&self.out_mean).chain(&self.out_std);
        if all.clone().any(|v| !v.is_finite()) || self.in_std.iter().chain(&self.out_std).any(|s| *s <= 0.0) {
            return Err(Error::NonFinite("normalisation statistics".into()));
        }
        Ok(())
    }

    pub fn normalize_input(&self, x: &[f64; N_PREDICTORS]) -> [f64; N_PREDICTORS] {
        std::array::from_fn(|k| (x[k] - self.in_mean[k]) / self.in_std[k])
    }

    pub fn normalize_target(&self, y: &[f64; N_OUTPUTS]) -> [f64; N_OUTPUTS] {
        std::array::from_fn(|k| (y[k] - self.out_mean[k]) / self.out_std[k])
    }
}

/// Positional predictors of column `(j, i)`: a periodic function of the
/// zonal index and an odd function of the distance from the channel centre.
pub fn position_features(grid: Grid, j: usize, i: usize) -> [f64; 2] {
    let (nx, ny) = (grid.nx as f64, grid.ny as f64);
    let theta = i as f64 + 1.0;
    let lambda = j as f64 + 1.0;
    [(2.0 * PI * (theta - 0.5) / nx).sin(), (PI * (lambda - 0.5 - ny / 2.0) / ny).sin()]
}

/// Raw predictors of every column, in row-major `(j, i)` order.
pub fn column_predictors(grid: Grid, psi: &[f64]) -> Result<Vec<[f64; N_PREDICTORS]>> {
    check_len("state", grid.len(), psi.len())?;
    let n = grid.layer_len();
    let mut out = Vec::with_capacity(n);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = j * grid.nx + i;
            let [a, b] = position_features(grid, j, i);
            out.push([psi[k], psi[n + k], a, b]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnCorrector {
    pub spec: NetSpec,
    pub weights: WeightVector,
    pub norm: Normalization,
}

impl ColumnCorrector {
    pub fn new(spec: NetSpec, weights: WeightVector, norm: Normalization) -> Result<Self> {
        if spec.input_width() != N_PREDICTORS || spec.output_width() != N_OUTPUTS {
            return Err(Error::Config(format!(
                "corrector network must map {N_PREDICTORS} predictors to {N_OUTPUTS} outputs, got {}",
                spec.to_text()
            )));
        }
        weights.check(&spec)?;
        norm.validate()?;
        Ok(Self { spec, weights, norm })
    }

    pub fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    /// Forcing field `F(x; p)` with the stored weights.
    pub fn apply(&self, grid: Grid, psi: &[f64]) -> Result<Vec<f64>> {
        self.apply_with(&self.weights, grid, psi)
    }

    /// Forcing field `F(x; p)` with explicit weights.
    pub fn apply_with(&self, p: &WeightVector, grid: Grid, psi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.linearize(p, grid, psi)?.output)
    }

    /// Evaluate at `(x, p)` and keep the activations for Jacobian products.
    pub fn linearize(&self, p: &WeightVector, grid: Grid, psi: &[f64]) -> Result<CorrectorJacobian<'_>> {
        p.check(&self.spec)?;
        let preds = column_predictors(grid, psi)?;
        let cl = self.spec.cache_len();
        let mut acts = vec![0.0; cl * preds.len()];
        let n = grid.layer_len();
        let mut output = vec![0.0; 2 * n];
        let no = cl - N_OUTPUTS;
        for (c, x) in preds.iter().enumerate() {
            let xn = self.norm.normalize_input(x);
            let a = &mut acts[c * cl..(c + 1) * cl];
            forward_cached(&self.spec, &p.0, &xn, a);
            output[c] = self.norm.out_mean[0] + self.norm.out_std[0] * a[no];
            output[n + c] = self.norm.out_mean[1] + self.norm.out_std[1] * a[no + 1];
        }
        if output.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("corrector output".into()));
        }
        Ok(CorrectorJacobian { corr: self, p: p.clone(), grid, acts, output })
    }
}

/// Corrector evaluated at a fixed `(x, p)` with cached activations.
#[derive(Debug, Clone)]
pub struct CorrectorJacobian<'a> {
    corr: &'a ColumnCorrector,
    p: WeightVector,
    grid: Grid,
    acts: Vec<f64>,
    pub output: Vec<f64>,
}

impl CorrectorJacobian<'_> {
    fn columns(&self) -> usize {
        self.grid.layer_len()
    }

    /// `Fˣ dx`: response of the forcing to a state increment.
    pub fn tl_state(&self, dx: &[f64]) -> Vec<f64> {
        let n = self.columns();
        let spec = &self.corr.spec;
        let nm = &self.corr.norm;
        let cl = spec.cache_len();
        let mut work = vec![0.0; work_len(spec)];
        let mut out = vec![0.0; 2 * n];
        let mut dy = [0.0; N_OUTPUTS];
        for c in 0..n {
            let dxn = [dx[c] / nm.in_std[0], dx[n + c] / nm.in_std[1], 0.0, 0.0];
            tl_cached(spec, &self.p.0, &self.acts[c * cl..(c + 1) * cl], Some(&dxn), None, &mut dy, &mut work);
            out[c] = nm.out_std[0] * dy[0];
            out[n + c] = nm.out_std[1] * dy[1];
        }
        out
    }

    /// `Fᵖ dp`: response of the forcing to a weight increment.
    pub fn tl_params(&self, dp: &[f64]) -> Vec<f64> {
        let n = self.columns();
        let spec = &self.corr.spec;
        let nm = &self.corr.norm;
        let cl = spec.cache_len();
        let mut work = vec![0.0; work_len(spec)];
        let mut out = vec![0.0; 2 * n];
        let mut dy = [0.0; N_OUTPUTS];
        for c in 0..n {
            tl_cached(spec, &self.p.0, &self.acts[c * cl..(c + 1) * cl], None, Some(dp), &mut dy, &mut work);
            out[c] = nm.out_std[0] * dy[0];
            out[n + c] = nm.out_std[1] * dy[1];
        }
        out
    }

    /// `[Fˣ]ᵀ wt` and/or `[Fᵖ]ᵀ wt` in a single backward sweep.
    pub fn adjoint(&self, wt: &[f64], want_state: bool, want_params: bool) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let n = self.columns();
        let spec = &self.corr.spec;
        let nm = &self.corr.norm;
        let cl = spec.cache_len();
        let mut work = vec![0.0; work_len(spec)];
        let mut xs = want_state.then(|| vec![0.0; 2 * n]);
        let mut ps = want_params.then(|| vec![0.0; spec.n_params()]);
        let mut dxt = [0.0; N_PREDICTORS];
        for c in 0..n {
            let dyt = [nm.out_std[0] * wt[c], nm.out_std[1] * wt[n + c]];
            if dyt[0] == 0.0 && dyt[1] == 0.0 {
                continue;
            }
            ad_cached(
                spec,
                &self.p.0,
                &self.acts[c * cl..(c + 1) * cl],
                &dyt,
                xs.is_some().then_some(&mut dxt[..]),
                ps.as_deref_mut(),
                &mut work,
            );
            if let Some(xs) = xs.as_mut() {
                xs[c] = dxt[0] / nm.in_std[0];
                xs[n + c] = dxt[1] / nm.in_std[1];
            }
        }
        (xs, ps)
    }

    pub fn ad_state(&self, wt: &[f64]) -> Vec<f64> {
        self.adjoint(wt, true, false).0.unwrap()
    }

    pub fn ad_params(&self, wt: &[f64]) -> Vec<f64> {
        self.adjoint(wt, false, true).1.unwrap()
    }
}
