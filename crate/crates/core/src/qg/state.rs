use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

/// Grid dimensions shared by every field on the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(nx: usize, ny: usize) -> Self {
        Self { nx, ny }
    }

    /// Values per layer.
    pub fn layer_len(&self) -> usize {
        self.nx * self.ny
    }

    /// Values per two-layer field.
    pub fn len(&self) -> usize {
        2 * self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, layer: usize, j: usize, i: usize) -> usize {
        (layer * self.ny + j) * self.nx + i
    }
}

/// Two-layer streamfunction, layer-major `[layer][y][x]`, nondimensional.
#[derive(Debug, Clone, PartialEq)]
pub struct QgState {
    pub grid: Grid,
    pub psi: Vec<f64>,
    /// Seconds since the experiment epoch.
    pub valid_time: f64,
}

impl QgState {
    pub fn new(grid: Grid, psi: Vec<f64>, valid_time: f64) -> Result<Self> {
        check_len("state values", grid.len(), psi.len())?;
        Ok(Self { grid, psi, valid_time })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, psi: vec![0.0; grid.len()], valid_time: 0.0 }
    }

    pub fn layer(&self, l: usize) -> &[f64] {
        let n = self.grid.layer_len();
        &self.psi[l * n..(l + 1) * n]
    }

    #[inline]
    pub fn at(&self, layer: usize, j: usize, i: usize) -> f64 {
        self.psi[self.grid.idx(layer, j, i)]
    }

    /// Root-mean-square difference over all stored values.
    pub fn rmse(&self, other: &QgState) -> f64 {
        rms_diff(&self.psi, &other.psi)
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(|v| v.is_finite())
    }

    /// Cyclic shift by `shift` cells in x (positive moves values eastward).
    pub fn shifted_x(&self, shift: usize) -> QgState {
        QgState { grid: self.grid, psi: shift_x(self.grid, &self.psi, shift), valid_time: self.valid_time }
    }
}

pub(crate) fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s / a.len() as f64).sqrt()
}

/// Cyclic x-shift of any layer-major field on `grid` with `len / nx` rows.
pub fn shift_x(grid: Grid, v: &[f64], shift: usize) -> Vec<f64> {
    let nx = grid.nx;
    let mut out = vec![0.0; v.len()];
    for (row_in, row_out) in v.chunks_exact(nx).zip(out.chunks_exact_mut(nx)) {
        for i in 0..nx {
            row_out[(i + shift) % nx] = row_in[i];
        }
    }
    out
}

/// Potential vorticity on the same layout as [`QgState`].
#[derive(Debug, Clone, PartialEq)]
pub struct PvField {
    pub grid: Grid,
    pub q: Vec<f64>,
}

/// Bottom-layer orography term added to layer-1 PV.
#[derive(Debug, Clone, PartialEq)]
pub struct OrographyField {
    pub grid: Grid,
    pub rs: Vec<f64>,
}

impl OrographyField {
    /// Single Gaussian hill centred at `(nx/4, ny/2)`.
    pub fn hill(grid: Grid, amplitude: f64, radius: f64) -> Self {
        let cx = grid.nx as f64 / 4.0;
        let cy = grid.ny as f64 / 2.0;
        let mut rs = vec![0.0; grid.layer_len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                // periodic distance in x
                let mut dx = (i as f64 - cx).abs();
                dx = dx.min(grid.nx as f64 - dx);
                let dy = j as f64 - cy;
                rs[j * grid.nx + i] = amplitude * (-(dx * dx + dy * dy) / (radius * radius)).exp();
            }
        }
        Self { grid, rs }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, rs: vec![0.0; grid.layer_len()] }
    }

    pub fn shifted_x(&self, shift: usize) -> Self {
        Self { grid: self.grid, rs: shift_x(self.grid, &self.rs, shift) }
    }
}

/// Fixed channel walls: streamfunction on the ghost rows just outside the grid
/// and the frozen PV on the first and last stored rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Walls {
    /// `[layer][x]` ghost row below row 0.
    pub psi_south: Vec<f64>,
    /// `[layer][x]` ghost row above row `ny - 1`.
    pub psi_north: Vec<f64>,
    /// `[layer][x]` PV held on row 0.
    pub q_south: Vec<f64>,
    /// `[layer][x]` PV held on row `ny - 1`.
    pub q_north: Vec<f64>,
}

impl Walls {
    pub fn zeros(grid: Grid) -> Self {
        let n = 2 * grid.nx;
        Self { psi_south: vec![0.0; n], psi_north: vec![0.0; n], q_south: vec![0.0; n], q_north: vec![0.0; n] }
    }

    pub fn shifted_x(&self, grid: Grid, shift: usize) -> Self {
        let g = Grid::new(grid.nx, 1);
        Self {
            psi_south: shift_x(g, &self.psi_south, shift),
            psi_north: shift_x(g, &self.psi_north, shift),
            q_south: shift_x(g, &self.q_south, shift),
            q_north: shift_x(g, &self.q_north, shift),
        }
    }
}
