//! Observation network, bilinear observation operator and synthetic
//! observations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::qg::{Grid, QgState};

const DEFAULT_NETWORK: &str = include_str!("../../data/obs_network.csv");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsLocation {
    pub id: usize,
    /// Fractional column index in `[0, nx)`.
    pub x: f64,
    /// Fractional row index in `[0, ny - 1]`.
    pub y: f64,
    pub layer: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObsNetwork {
    pub locations: Vec<ObsLocation>,
    pub interval_seconds: f64,
    pub first_offset_seconds: f64,
    pub window_seconds: f64,
}

fn halton(mut k: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

impl ObsNetwork {
    /// The shipped 30-location network for the 40×20 channel.
    pub fn default_network() -> Self {
        Self::from_csv(DEFAULT_NETWORK).expect("bundled network file is valid")
    }

    /// `count` locations from the (2, 3) Halton sequence over the interior
    /// rows, layers alternating.
    pub fn halton(grid: Grid, count: usize) -> Self {
        let locations = (0..count)
            .map(|k| ObsLocation {
                id: k,
                x: grid.nx as f64 * halton(k + 1, 2),
                y: 1.0 + (grid.ny as f64 - 3.0) * halton(k + 1, 3),
                layer: k % 2,
            })
            .collect();
        Self { locations, ..Self::timing_only() }
    }

    fn timing_only() -> Self {
        Self { locations: Vec::new(), interval_seconds: 7200.0, first_offset_seconds: 3600.0, window_seconds: 86400.0 }
    }

    /// Parse the `id,x,y,layer` table.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut locations = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Config(format!("network line {}: bad {what}", n + 1));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad("field count"));
            }
            locations.push(ObsLocation {
                id: f[0].parse().map_err(|_| bad("id"))?,
                x: f[1].parse().map_err(|_| bad("x"))?,
                y: f[2].parse().map_err(|_| bad("y"))?,
                layer: f[3].parse().map_err(|_| bad("layer"))?,
            });
        }
        Ok(Self { locations, ..Self::timing_only() })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,x,y,layer\n");
        for l in &self.locations {
            s += &format!("{},{:.16e},{:.16e},{}\n", l.id, l.x, l.y, l.layer);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Times of the batches relative to the window start: 1 h, 3 h, …, 23 h.
    pub fn batch_offsets(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = self.first_offset_seconds;
        while t < self.window_seconds {
            out.push(t);
            t += self.interval_seconds;
        }
        out
    }

    pub fn validate(&self, grid: Grid) -> Result<()> {
        for l in &self.locations {
            let inside = (0.0..grid.nx as f64).contains(&l.x) && (0.0..=(grid.ny - 1) as f64).contains(&l.y);
            if !inside || !l.x.is_finite() || !l.y.is_finite() {
                return Err(Error::ObsLocation { x: l.x, y: l.y });
            }
            if l.layer > 1 {
                return Err(Error::Config(format!("observation {} has layer {}", l.id, l.layer)));
            }
        }
        Ok(())
    }

    pub fn operator(&self, grid: Grid) -> Result<ObsOperator> {
        self.validate(grid)?;
        let stencils = self
            .locations
            .iter()
            .map(|l| {
                let i0 = l.x as usize;
                let fx = l.x - i0 as f64;
                let i1 = (i0 + 1) % grid.nx;
                let j0 = (l.y as usize).min(grid.ny - 2);
                let fy = l.y - j0 as f64;
                let idx = [
                    grid.idx(l.layer, j0, i0),
                    grid.idx(l.layer, j0, i1),
                    grid.idx(l.layer, j0 + 1, i0),
                    grid.idx(l.layer, j0 + 1, i1),
                ];
                let wts = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
                (idx, wts)
            })
            .collect();
        Ok(ObsOperator { grid, stencils })
    }
}

/// Bilinear interpolation at the network locations. Linear, so it is its own
/// tangent-linear.
#[derive(Debug, Clone)]
pub struct ObsOperator {
    grid: Grid,
    stencils: Vec<([usize; 4], [f64; 4])>,
}

impl ObsOperator {
    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    pub fn observe(&self, psi: &[f64]) -> Result<Vec<f64>> {
        check_len("state", self.grid.len(), psi.len())?;
        Ok(self.stencils.iter().map(|(idx, w)| (0..4).map(|c| w[c] * psi[idx[c]]).sum()).collect())
    }

    /// Scatter observation-space values back to the grid.
    pub fn adjoint(&self, values: &[f64]) -> Result<Vec<f64>> {
        check_len("observation vector", self.len(), values.len())?;
        let mut out = vec![0.0; self.grid.len()];
        for ((idx, w), v) in self.stencils.iter().zip(values) {
            for c in 0..4 {
                out[idx[c]] += w[c] * v;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObsBatch {
    /// Seconds after the window start.
    pub offset_seconds: f64,
    pub values: Vec<f64>,
    pub r: f64,
}

/// All batches of one assimilation window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowObservations {
    pub start_seconds: f64,
    pub batches: Vec<ObsBatch>,
}

impl WindowObservations {
    pub fn n_values(&self) -> usize {
        self.batches.iter().map(|b| b.values.len()).sum()
    }
}

/// `y_k = H(x_k) + ε_k`. `truth[k]` must be valid at the k-th batch time.
pub fn simulate_observations(
    truth: &[QgState],
    net: &ObsNetwork,
    start_seconds: f64,
    r: f64,
    seed: u64,
) -> Result<WindowObservations> {
    let offsets = net.batch_offsets();
    check_len("truth states", offsets.len(), truth.len())?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Config(format!("observation std must be non-negative, got {r}")));
    }
    let op = net.operator(truth[0].grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batches = Vec::with_capacity(offsets.len());
    for (s, off) in truth.iter().zip(&offsets) {
        if (s.valid_time - (start_seconds + off)).abs() > 1e-6 {
            return Err(Error::Data {
                path: "truth".into(),
                reason: format!("state valid at {} s, expected {} s", s.valid_time, start_seconds + off),
            });
        }
        let mut values = op.observe(&s.psi)?;
        if r > 0.0 {
            for v in values.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v += r * e;
            }
        }
        batches.push(ObsBatch { offset_seconds: *off, values, r });
    }
    Ok(WindowObservations { start_seconds, batches })
}
