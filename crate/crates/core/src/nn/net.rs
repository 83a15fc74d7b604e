//! Dense feed-forward network with hand-written tangent-linear and adjoint
//! operators with respect to both the input and the parameters.
//!
//! Parameters are flattened layer by layer: the `out × in` weight matrix in
//! row-major order, then the `out` biases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub layers: Vec<LayerSpec>,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self::column_default()
    }
}

impl NetSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].output != w[1].input {
                return Err(Error::Config(format!("layer widths do not chain: {} -> {}", w[0].output, w[1].input)));
            }
        }
        if layers.iter().any(|l| l.input == 0 || l.output == 0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        Ok(Self { layers })
    }

    /// 4 → 16 (tanh) → 16 (tanh) → 2 (linear).
    pub fn column_default() -> Self {
        use Activation::*;
        Self {
            layers: vec![
                LayerSpec { input: 4, output: 16, activation: Tanh },
                LayerSpec { input: 16, output: 16, activation: Tanh },
                LayerSpec { input: 16, output: 2, activation: Linear },
            ],
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.input * l.output + l.output).sum()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().output
    }

    /// Total length of the activation cache: input plus every layer output.
    pub fn cache_len(&self) -> usize {
        self.input_width() + self.layers.iter().map(|l| l.output).sum::<usize>()
    }

    fn max_width(&self) -> usize {
        self.layers.iter().map(|l| l.input.max(l.output)).max().unwrap()
    }

    /// Compact text form, e.g. `4x16:tanh,16x16:tanh,16x2:linear`.
    pub fn to_text(&self) -> String {
        self.layers
            .iter()
            .map(|l| format!("{}x{}:{}", l.input, l.output, l.activation.name()))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for part in s.trim().split(',') {
            let bad = || Error::Config(format!("bad layer description '{part}'"));
            let (dims, act) = part.split_once(':').ok_or_else(bad)?;
            let (i, o) = dims.split_once('x').ok_or_else(bad)?;
            layers.push(LayerSpec {
                input: i.parse().map_err(|_| bad())?,
                output: o.parse().map_err(|_| bad())?,
                activation: Activation::parse(act).ok_or_else(bad)?,
            });
        }
        Self::new(layers)
    }
}

/// Flat parameter vector of a [`NetSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(spec: &NetSpec) -> Self {
        Self(vec![0.0; spec.n_params()])
    }

    pub fn check(&self, spec: &NetSpec) -> Result<()> {
        check_len("weight vector", spec.n_params(), self.0.len())?;
        if let Some(k) = self.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("weight {k}")));
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_weights(spec: &NetSpec, seed: u64) -> WeightVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Vec::with_capacity(spec.n_params());
    for l in &spec.layers {
        let limit = (6.0 / (l.input + l.output) as f64).sqrt();
        p.extend((0..l.input * l.output).map(|_| rng.random_range(-limit..limit)));
        p.extend(std::iter::repeat_n(0.0, l.output));
    }
    WeightVector(p)
}

// ---- allocation-free kernels -------------------------------------------------
//
// `acts` holds the input followed by every layer's post-activation output.

pub(crate) fn forward_cached(spec: &NetSpec, p: &[f64], x: &[f64], acts: &mut [f64]) {
    let nin = spec.input_width();
    acts[..nin].copy_from_slice(x);
    let mut po = 0;
    let mut ao = 0;
    for l in &spec.layers {
        let (head, tail) = acts.split_at_mut(ao + l.input);
        let h = &head[ao..];
        let out = &mut tail[..l.output];
        let w = &p[po..po + l.input * l.output];
        let b = &p[po + l.input * l.output..po + l.input * l.output + l.output];
        for o in 0..l.output {
            let row = &w[o * l.input..(o + 1) * l.input];
            let z = b[o] + row.iter().zip(h).map(|(a, c)| a * c).sum::<f64>();
            out[o] = match l.activation {
                Activation::Tanh => z.tanh(),
                Activation::Linear => z,
            };
        }
        po += l.input * l.output + l.output;
        ao += l.input;
    }
}

#[inline]
fn act_deriv(a: Activation, y: f64) -> f64 {
    match a {
        Activation::Tanh => 1.0 - y * y,
        Activation::Linear => 1.0,
    }
}

/// Jacobian-vector product with optional input and parameter directions.
pub(crate) fn tl_cached(
    spec: &NetSpec,
    p: &[f64],
    acts: &[f64],
    dx: Option<&[f64]>,
    dp: Option<&[f64]>,
    dy: &mut [f64],
    work: &mut [f64],
) {
    let mw = spec.max_width();
    let (cur, next) = work.split_at_mut(mw);
    let nin = spec.input_width();
    match dx {
        Some(d) => cur[..nin].copy_from_slice(d),
        None => cur[..nin].iter_mut().for_each(|v| *v = 0.0),
    }
    let mut po = 0;
    let mut ao = 0;
    for l in &spec.layers {
        let h = &acts[ao..ao + l.input];
        let y = &acts[ao + l.input..ao + l.input + l.output];
        let nw = l.input * l.output;
        let w = &p[po..po + nw];
        for o in 0..l.output {
            let row = &w[o * l.input..(o + 1) * l.input];
            let mut z: f64 = row.iter().zip(&cur[..l.input]).map(|(a, c)| a * c).sum();
            if let Some(dp) = dp {
                let drow = &dp[po + o * l.input..po + (o + 1) * l.input];
                z += drow.iter().zip(h).map(|(a, c)| a * c).sum::<f64>() + dp[po + nw + o];
            }
            next[o] = act_deriv(l.activation, y[o]) * z;
        }
        cur[..l.output].copy_from_slice(&next[..l.output]);
        po += nw + l.output;
        ao += l.input;
    }
    dy.copy_from_slice(&cur[..spec.output_width()]);
}

/// Vector-Jacobian product. Input adjoint is written to `dxt`, parameter
/// adjoint is accumulated into `dpt`.
pub(crate) fn ad_cached(
    spec: &NetSpec,
    p: &[f64],
    acts: &[f64],
    dyt: &[f64],
    dxt: Option<&mut [f64]>,
    mut dpt: Option<&mut [f64]>,
    work: &mut [f64],
) {
    let mw = spec.max_width();
    let (g, gprev) = work.split_at_mut(mw);
    let nout = spec.output_width();
    g[..nout].copy_from_slice(dyt);
    let mut po = spec.n_params();
    let mut end = spec.cache_len();
    for l in spec.layers.iter().rev() {
        let nw = l.input * l.output;
        po -= nw + l.output;
        let ys = end - l.output;
        let y = &acts[ys..end];
        let h = &acts[ys - l.input..ys];
        end = ys;
        for o in 0..l.output {
            g[o] *= act_deriv(l.activation, y[o]);
        }
        if let Some(dpt) = dpt.as_deref_mut() {
            for o in 0..l.output {
                let go = g[o];
                let drow = &mut dpt[po + o * l.input..po + (o + 1) * l.input];
                drow.iter_mut().zip(h).for_each(|(a, c)| *a += go * c);
                dpt[po + nw + o] += go;
            }
        }
        let w = &p[po..po + nw];
        gprev[..l.input].iter_mut().for_each(|v| *v = 0.0);
        for o in 0..l.output {
            let go = g[o];
            let row = &w[o * l.input..(o + 1) * l.input];
            gprev[..l.input].iter_mut().zip(row).for_each(|(a, c)| *a += go * c);
        }
        g[..l.input].copy_from_slice(&gprev[..l.input]);
    }
    if let Some(dxt) = dxt {
        dxt.copy_from_slice(&g[..spec.input_width()]);
    }
}

pub(crate) fn work_len(spec: &NetSpec) -> usize {
    2 * spec.max_width()
}

// ---- checked public operators ------------------------------------------------

fn prepare(spec: &NetSpec, p: &WeightVector, x: &[f64]) -> Result<Vec<f64>> {
    p.check(spec)?;
    check_len("network input", spec.input_width(), x.len())?;
    let mut acts = vec![0.0; spec.cache_len()];
    forward_cached(spec, &p.0, x, &mut acts);
    Ok(acts)
}

pub fn forward(spec: &NetSpec, p: &WeightVector, x: &[f64]) -> Result<Vec<f64>> {
    let acts = prepare(spec, p, x)?;
    Ok(acts[spec.cache_len() - spec.output_width()..].to_vec())
}

/// `Fˣ dx` at `(p, x)`.
pub fn tl_input(spec: &NetSpec, p: &WeightVector, x: &[f64], dx: &[f64]) -> Result<Vec<f64>> {
    check_len("input increment", spec.input_width(), dx.len())?;
    let acts = prepare(spec, p, x)?;
    let mut dy = vec![0.0; spec.output_width()];
    let mut work = vec![0.0; work_len(spec)];
    tl_cached(spec, &p.0, &acts, Some(dx), None, &mut dy, &mut work);
    Ok(dy)
}

/// `Fᵖ dp` at `(p, x)`.
pub fn tl_params(spec: &NetSpec, p: &WeightVector, x: &[f64], dp: &[f64]) -> Result<Vec<f64>> {
    check_len("parameter increment", spec.n_params(), dp.len())?;
    let acts = prepare(spec, p, x)?;
    let mut dy = vec![0.0; spec.output_width()];
    let mut work = vec![0.0; work_len(spec)];
    tl_cached(spec, &p.0, &acts, None, Some(dp), &mut dy, &mut work);
    Ok(dy)
}

/// `[Fˣ]ᵀ dyt` at `(p, x)`.
pub fn ad_input(spec: &NetSpec, p: &WeightVector, x: &[f64], dyt: &[f64]) -> Result<Vec<f64>> {
    check_len("output adjoint", spec.output_width(), dyt.len())?;
    let acts = prepare(spec, p, x)?;
    let mut dxt = vec![0.0; spec.input_width()];
    let mut work = vec![0.0; work_len(spec)];
    ad_cached(spec, &p.0, &acts, dyt, Some(&mut dxt), None, &mut work);
    Ok(dxt)
}

/// `[Fᵖ]ᵀ dyt` at `(p, x)`.
pub fn ad_params(spec: &NetSpec, p: &WeightVector, x: &[f64], dyt: &[f64]) -> Result<Vec<f64>> {
    check_len("output adjoint", spec.output_width(), dyt.len())?;
    let acts = prepare(spec, p, x)?;
    let mut dpt = vec![0.0; spec.n_params()];
    let mut work = vec![0.0; work_len(spec)];
    ad_cached(spec, &p.0, &acts, dyt, None, Some(&mut dpt), &mut work);
    Ok(dpt)
}
