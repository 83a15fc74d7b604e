//! Separable Gaussian correlation operators and the covariance operators
//! built from them.
//!
//! `C = C_layer ⊗ C_y ⊗ C_x`, each factor a small dense symmetric matrix held
//! through its eigendecomposition. The x factor is circulant (periodic
//! channel), the y factor uses mirror images across both walls. Eigenvalues are
//! floored at a fraction of the largest one: Gaussian spectra decay faster
//! than round-off and would otherwise make the inverse meaningless.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::qg::Grid;

/// Relative eigenvalue floor of every 1-D correlation factor.
pub const EIGEN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    ShortRange,
    LongRange,
}

/// Standard deviations and correlation shapes of the four error sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovarianceConfig {
    pub b: f64,
    pub q: f64,
    pub p: f64,
    pub r: f64,
    /// Length scales in grid cells.
    pub short_length: f64,
    pub long_length: f64,
    pub layer_correlation: f64,
    /// Inter-layer correlation of the long-range (model-error) shape.
    pub long_layer_correlation: f64,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self {
            b: 0.4,
            q: 0.001,
            p: 0.02,
            r: 0.2,
            short_length: 2.0,
            long_length: 12.0,
            layer_correlation: 0.5,
            long_layer_correlation: 0.9,
        }
    }
}

impl CovarianceConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b", self.b),
            ("q", self.q),
            ("p", self.p),
            ("r", self.r),
            ("short_length", self.short_length),
            ("long_length", self.long_length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("covariance.{name} must be positive, got {v}")));
            }
        }
        for (name, v) in
            [("layer_correlation", self.layer_correlation), ("long_layer_correlation", self.long_layer_correlation)]
        {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("covariance.{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn length(&self, kind: CorrelationKind) -> f64 {
        match kind {
            CorrelationKind::ShortRange => self.short_length,
            CorrelationKind::LongRange => self.long_length,
        }
    }

    pub fn background(&self, grid: Grid) -> Result<Covariance> {
        let c = Correlation::new(grid, CorrelationKind::ShortRange, self.short_length, self.layer_correlation)?;
        Ok(Covariance::correlated(self.b, c))
    }

    pub fn model_error(&self, grid: Grid) -> Result<Covariance> {
        let c = Correlation::new(grid, CorrelationKind::LongRange, self.long_length, self.long_layer_correlation)?;
        Ok(Covariance::correlated(self.q, c))
    }

    pub fn parameters(&self, n: usize) -> Covariance {
        Covariance::diagonal(self.p, n)
    }
}

/// Dense symmetric matrix with precomputed functions of it.
#[derive(Debug, Clone)]
struct Factor {
    n: usize,
    full: Vec<f64>,
    sqrt: Vec<f64>,
    inv: Vec<f64>,
    inv_sqrt: Vec<f64>,
}

impl Factor {
    fn new(n: usize, m: &[f64]) -> Self {
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, m));
        let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let lam: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(EIGEN_FLOOR * top)).collect();
        let build = |f: &dyn Fn(f64) -> f64| {
            let mut out = vec![0.0; n * n];
            for r in 0..n {
                for c in 0..n {
                    out[r * n + c] =
                        (0..n).map(|k| eig.eigenvectors[(r, k)] * f(lam[k]) * eig.eigenvectors[(c, k)]).sum();
                }
            }
            // symmetrise away the round-off of the reconstruction
            for r in 0..n {
                for c in r + 1..n {
                    let v = 0.5 * (out[r * n + c] + out[c * n + r]);
                    out[r * n + c] = v;
                    out[c * n + r] = v;
                }
            }
            out
        };
        Self {
            n,
            full: build(&|l| l),
            sqrt: build(&|l| l.sqrt()),
            inv: build(&|l| 1.0 / l),
            inv_sqrt: build(&|l| 1.0 / l.sqrt()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Which {
    Full,
    Sqrt,
    Inv,
    InvSqrt,
}

impl Which {
    fn pick(self, f: &Factor) -> &[f64] {
        match self {
            Which::Full => &f.full,
            Which::Sqrt => &f.sqrt,
            Which::Inv => &f.inv,
            Which::InvSqrt => &f.inv_sqrt,
        }
    }
}

/// `C_layer ⊗ C_y ⊗ C_x` on the state layout `[layer][y][x]`.
#[derive(Debug, Clone)]
pub struct Correlation {
    pub kind: CorrelationKind,
    pub length: f64,
    pub layer_correlation: f64,
    grid: Grid,
    fx: Factor,
    fy: Factor,
    fl: Factor,
}

fn gauss(r: f64, length: f64) -> f64 {
    (-0.5 * (r / length).powi(2)).exp()
}

impl Correlation {
    pub fn new(grid: Grid, kind: CorrelationKind, length: f64, layer_correlation: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("correlation length must be positive, got {length}")));
        }
        if !(0.0..1.0).contains(&layer_correlation) {
            return Err(Error::Config(format!("layer correlation must lie in [0, 1), got {layer_correlation}")));
        }
        let Grid { nx, ny } = grid;
        let mut mx = vec![0.0; nx * nx];
        for a in 0..nx {
            for b in 0..nx {
                let d = a.abs_diff(b);
                mx[a * nx + b] = gauss(d.min(nx - d) as f64, length);
            }
        }
        // images across the walls at -1/2 and ny - 1/2
        let raw = |a: usize, b: usize| {
            let (a, b) = (a as f64, b as f64);
            gauss(a - b, length) + gauss(a + b + 1.0, length) + gauss(2.0 * ny as f64 - 1.0 - a - b, length)
        };
        let mut my = vec![0.0; ny * ny];
        for a in 0..ny {
            for b in 0..ny {
                my[a * ny + b] = raw(a, b) / (raw(a, a) * raw(b, b)).sqrt();
            }
        }
        let ml = [1.0, layer_correlation, layer_correlation, 1.0];
        Ok(Self {
            kind,
            length,
            layer_correlation,
            grid,
            fx: Factor::new(nx, &mx),
            fy: Factor::new(ny, &my),
            fl: Factor::new(2, &ml),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn kron(&self, which: Which, v: &[f64]) -> Vec<f64> {
        let Grid { nx, ny } = self.grid;
        let n = nx * ny;
        let mx = which.pick(&self.fx);
        let my = which.pick(&self.fy);
        let ml = which.pick(&self.fl);
        debug_assert_eq!(self.fx.n * self.fy.n * self.fl.n, v.len());
        // x
        let mut a = vec![0.0; v.len()];
        for (src, dst) in v.chunks_exact(nx).zip(a.chunks_exact_mut(nx)) {
            for (r, d) in dst.iter_mut().enumerate() {
                *d = mx[r * nx..(r + 1) * nx].iter().zip(src).map(|(m, s)| m * s).sum();
            }
        }
        // y
        let mut b = vec![0.0; v.len()];
        for l in 0..2 {
            for r in 0..ny {
                let dst = &mut b[l * n + r * nx..l * n + (r + 1) * nx];
                for c in 0..ny {
                    let m = my[r * ny + c];
                    dst.iter_mut().zip(&a[l * n + c * nx..l * n + (c + 1) * nx]).for_each(|(d, s)| *d += m * s);
                }
            }
        }
        // layer
        let mut out = vec![0.0; v.len()];
        for k in 0..n {
            out[k] = ml[0] * b[k] + ml[1] * b[n + k];
            out[n + k] = ml[2] * b[k] + ml[3] * b[n + k];
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Correlated(Correlation),
    Identity(usize),
}

/// `σ² C` with symmetric square root and inverse.
#[derive(Debug, Clone)]
pub struct Covariance {
    sigma: f64,
    shape: Shape,
}

impl Covariance {
    pub fn correlated(sigma: f64, corr: Correlation) -> Self {
        Self { sigma, shape: Shape::Correlated(corr) }
    }

    pub fn diagonal(sigma: f64, n: usize) -> Self {
        Self { sigma, shape: Shape::Identity(n) }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Correlated(c) => c.grid.len(),
            Shape::Identity(n) => *n,
        }
    }

    fn run(&self, which: Which, scale: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_len("covariance operand", self.dim(), v.len())?;
        let mut out = match &self.shape {
            Shape::Correlated(c) => c.kron(which, v),
            Shape::Identity(_) => v.to_vec(),
        };
        out.iter_mut().for_each(|x| *x *= scale);
        Ok(out)
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.run(Which::Full, self.sigma * self.sigma, v)
    }

    /// Symmetric square root, so `apply_sqrt` is also its own transpose.
    pub fn apply_sqrt(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.run(Which::Sqrt, self.sigma, v)
    }

    pub fn apply_sqrt_t(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.apply_sqrt(v)
    }

    pub fn apply_inv(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.run(Which::Inv, 1.0 / (self.sigma * self.sigma), v)
    }

    pub fn apply_inv_sqrt(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.run(Which::InvSqrt, 1.0 / self.sigma, v)
    }
}
