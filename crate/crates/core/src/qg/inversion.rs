//! Linear part of the PV/streamfunction relation and its inverse.
//!
//! `A ψ = ∇²ψ_l − F_l (ψ_l − ψ_other)` with a periodic 5-point Laplacian in x and
//! homogeneous Dirichlet ghost rows in y. The inverse diagonalises the layer
//! coupling into a barotropic mode (eigenvalue 0) and a baroclinic mode
//! (eigenvalue −(F₁+F₂)), projects each on the sine eigenbasis of the y
//! second difference and solves the remaining periodic problem in x by a
//! real-space circular convolution. Every column is processed with the same
//! sequence of operations, so the solve commutes with x-shifts bit for bit.

use std::f64::consts::PI;

use super::state::Grid;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Helmholtz {
    grid: Grid,
    f1: f64,
    f2: f64,
    inv_d2: f64,
    /// Orthonormal sine basis, `basis[j * ny + k]` (symmetric).
    basis: Vec<f64>,
    /// Green's function of the x problem, `kernels[(mode * ny + k) * nx + offset]`.
    kernels: Vec<f64>,
}

impl Helmholtz {
    pub(crate) fn new(grid: Grid, f1: f64, f2: f64, d: f64) -> Result<Self> {
        let Grid { nx, ny } = grid;
        let inv_d2 = 1.0 / (d * d);
        let norm = (2.0 / (ny + 1) as f64).sqrt();
        let mut basis = vec![0.0; ny * ny];
        for j in 0..ny {
            for k in 0..ny {
                basis[j * ny + k] = norm * (PI * ((j + 1) * (k + 1)) as f64 / (ny + 1) as f64).sin();
            }
        }
        let mut kernels = vec![0.0; 2 * ny * nx];
        for mode in 0..2 {
            let kappa = if mode == 0 { 0.0 } else { f1 + f2 };
            for k in 0..ny {
                let mu = (2.0 * (PI * (k + 1) as f64 / (ny + 1) as f64).cos() - 2.0) * inv_d2;
                let mut inv_sym = vec![0.0; nx];
                for (m, v) in inv_sym.iter_mut().enumerate() {
                    let lambda = (2.0 * (2.0 * PI * m as f64 / nx as f64).cos() - 2.0) * inv_d2;
                    let denom = lambda + mu - kappa;
                    if !denom.is_finite() || denom.abs() < 1e-12 * inv_d2 {
                        return Err(Error::Inversion {
                            wavenumber: m,
                            reason: format!("vanishing eigenvalue {denom:e} in mode {mode}"),
                        });
                    }
                    *v = 1.0 / denom;
                }
                let g = &mut kernels[(mode * ny + k) * nx..(mode * ny + k + 1) * nx];
                for (off, gv) in g.iter_mut().enumerate() {
                    *gv =
                        (0..nx).map(|m| inv_sym[m] * (2.0 * PI * (m * off % nx) as f64 / nx as f64).cos()).sum::<f64>()
                            / nx as f64;
                }
            }
        }
        Ok(Self { grid, f1, f2, inv_d2, basis, kernels })
    }

    /// `out = A ψ` with zero ghost rows.
    pub(crate) fn apply(&self, psi: &[f64], out: &mut [f64]) {
        let Grid { nx, ny } = self.grid;
        let n = nx * ny;
        let s = self.inv_d2;
        let (f1, f2) = (self.f1, self.f2);
        for l in 0..2 {
            let (fl, other) = if l == 0 { (f1, n) } else { (f2, 0) };
            let base = l * n;
            for j in 0..ny {
                let row = base + j * nx;
                for i in 0..nx {
                    let k = row + i;
                    let c = psi[k];
                    let e = psi[row + if i + 1 == nx { 0 } else { i + 1 }];
                    let w = psi[row + if i == 0 { nx - 1 } else { i - 1 }];
                    let nrt = if j + 1 < ny { psi[k + nx] } else { 0.0 };
                    let sth = if j > 0 { psi[k - nx] } else { 0.0 };
                    let o = psi[k - base + other];
                    out[k] = s * (e + w + nrt + sth - 4.0 * c) - fl * (c - o);
                }
            }
        }
    }

    /// `out = Aᵀ q`. The Laplacian is symmetric; only the coupling transposes.
    pub(crate) fn apply_transpose(&self, q: &[f64], out: &mut [f64]) {
        let Grid { nx, ny } = self.grid;
        let n = nx * ny;
        let s = self.inv_d2;
        let (f1, f2) = (self.f1, self.f2);
        for l in 0..2 {
            let base = l * n;
            let (fl, fo, other) = if l == 0 { (f1, f2, n) } else { (f2, f1, 0) };
            for j in 0..ny {
                let row = base + j * nx;
                for i in 0..nx {
                    let k = row + i;
                    let c = q[k];
                    let e = q[row + if i + 1 == nx { 0 } else { i + 1 }];
                    let w = q[row + if i == 0 { nx - 1 } else { i - 1 }];
                    let nrt = if j + 1 < ny { q[k + nx] } else { 0.0 };
                    let sth = if j > 0 { q[k - nx] } else { 0.0 };
                    let o = q[k - base + other];
                    out[k] = s * (e + w + nrt + sth - 4.0 * c) - fl * c + fo * o;
                }
            }
        }
    }

    /// Solve `A ψ = rhs`.
    pub(crate) fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        crate::util::simd(|| self.solve_impl(rhs, out))
    }

    #[inline(always)]
    fn solve_impl(&self, rhs: &[f64], out: &mut [f64]) {
        let Grid { nx, ny } = self.grid;
        let n = nx * ny;
        let (f1, f2) = (self.f1, self.f2);
        let fs = f1 + f2;
        let mut modes = vec![0.0; 2 * n];
        for k in 0..n {
            let r1 = rhs[k];
            let r2 = rhs[n + k];
            modes[k] = (f2 * r1 + f1 * r2) / fs;
            modes[n + k] = r1 - r2;
        }
        let mut hat = vec![0.0; n];
        let mut padded = vec![0.0; 3 * nx];
        let mut fold = vec![0.0; n];
        for mode in 0..2 {
            let field = &mut modes[mode * n..(mode + 1) * n];
            self.project(field, &mut hat, &mut fold);
            for k in 0..ny {
                let row = &mut hat[k * nx..(k + 1) * nx];
                for c in 0..3 {
                    padded[c * nx..(c + 1) * nx].copy_from_slice(row);
                }
                let g = &self.kernels[(mode * ny + k) * nx..(mode * ny + k + 1) * nx];
                convolve_even(g, &padded, row);
            }
            self.project(&hat, field, &mut fold);
        }
        let c1 = f1 / fs;
        let c2 = f2 / fs;
        for k in 0..n {
            let xbt = modes[k];
            let xbc = modes[n + k];
            out[k] = xbt + c1 * xbc;
            out[n + k] = xbt - c2 * xbc;
        }
    }

    /// Apply the (symmetric, involutory) sine basis along y, column by column.
    /// Rows `j` and `ny-1-j` share basis values up to the sign `(-1)^k`, so the
    /// sum runs over folded row pairs.
    #[inline(always)]
    fn project(&self, src: &[f64], dst: &mut [f64], fold: &mut [f64]) {
        let Grid { nx, ny } = self.grid;
        let h = ny / 2;
        // fold[..h] = sums, fold[h..2h] = differences
        for j in 0..h {
            let a = &src[j * nx..(j + 1) * nx];
            let b = &src[(ny - 1 - j) * nx..(ny - j) * nx];
            for i in 0..nx {
                fold[j * nx + i] = a[i] + b[i];
                fold[(h + j) * nx + i] = a[i] - b[i];
            }
        }
        let mid = (ny % 2 == 1).then(|| &src[h * nx..(h + 1) * nx]);
        for k in 0..ny {
            let off = if k % 2 == 0 { 0 } else { h };
            // the basis is symmetric, so row k holds the coefficients
            let coef = &self.basis[k * ny..k * ny + h];
            let rows = &fold[off * nx..(off + h) * nx];
            let extra = mid.filter(|_| k % 2 == 0).map(|m| (self.basis[h * ny + k], m));
            combine_rows(coef, rows, extra, &mut dst[k * nx..(k + 1) * nx]);
        }
    }

    /// Solve `Aᵀ x = rhs` through `A⁻ᵀ = D A⁻¹ D⁻¹`, `D = diag(1/F₁, 1/F₂)`.
    pub(crate) fn solve_transpose(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.grid.layer_len();
        let mut scaled = rhs.to_vec();
        scaled[..n].iter_mut().for_each(|v| *v *= self.f1);
        scaled[n..].iter_mut().for_each(|v| *v *= self.f2);
        self.solve(&scaled, out);
        out[..n].iter_mut().for_each(|v| *v /= self.f1);
        out[n..].iter_mut().for_each(|v| *v /= self.f2);
    }
}

const BLOCK: usize = 8;

/// `out[i] = Σ_j coef[j] rows[j][i] (+ c·row[i])`, summed in `j` order for
/// every column.
#[inline(always)]
fn combine_rows(coef: &[f64], rows: &[f64], extra: Option<(f64, &[f64])>, out: &mut [f64]) {
    let nx = out.len();
    let mut i0 = 0;
    while i0 + BLOCK <= nx {
        let mut acc = [0.0; BLOCK];
        for (j, c) in coef.iter().enumerate() {
            let r = &rows[j * nx + i0..j * nx + i0 + BLOCK];
            for t in 0..BLOCK {
                acc[t] += c * r[t];
            }
        }
        if let Some((c, r)) = extra {
            for t in 0..BLOCK {
                acc[t] += c * r[i0 + t];
            }
        }
        out[i0..i0 + BLOCK].copy_from_slice(&acc);
        i0 += BLOCK;
    }
    for i in i0..nx {
        let mut acc = 0.0;
        for (j, c) in coef.iter().enumerate() {
            acc += c * rows[j * nx + i];
        }
        if let Some((c, r)) = extra {
            acc += c * r[i];
        }
        out[i] = acc;
    }
}

/// Circular convolution with an even kernel, `padded` holding three copies of
/// the input row.
#[inline(always)]
fn convolve_even(g: &[f64], padded: &[f64], out: &mut [f64]) {
    let nx = out.len();
    let half = nx.div_ceil(2);
    let centre = (nx % 2 == 0 && nx > 1).then(|| g[nx / 2]);
    let one = |i: usize| {
        let mut acc = g[0] * padded[nx + i];
        for d in 1..half {
            acc += g[d] * (padded[nx + i + d] + padded[nx + i - d]);
        }
        if let Some(gh) = centre {
            acc += gh * padded[nx + i + nx / 2];
        }
        acc
    };
    let mut i0 = 0;
    while i0 + BLOCK <= nx {
        let mut acc = [0.0; BLOCK];
        let base = &padded[nx + i0..nx + i0 + BLOCK];
        for t in 0..BLOCK {
            acc[t] = g[0] * base[t];
        }
        for d in 1..half {
            let gd = g[d];
            let f = &padded[nx + i0 + d..nx + i0 + d + BLOCK];
            let b = &padded[nx + i0 - d..nx + i0 - d + BLOCK];
            for t in 0..BLOCK {
                acc[t] += gd * (f[t] + b[t]);
            }
        }
        if let Some(gh) = centre {
            let c = &padded[nx + i0 + nx / 2..nx + i0 + nx / 2 + BLOCK];
            for t in 0..BLOCK {
                acc[t] += gh * c[t];
            }
        }
        out[i0..i0 + BLOCK].copy_from_slice(&acc);
        i0 += BLOCK;
    }
    for (i, o) in out.iter_mut().enumerate().skip(i0) {
        *o = one(i);
    }
}
