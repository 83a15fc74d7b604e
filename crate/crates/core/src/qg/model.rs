use super::config::QgConfig;
use super::inversion::Helmholtz;
use super::state::{Grid, OrographyField, PvField, QgState, Walls};
use super::tape::{Stencil, StepRecord, TrajectoryTape};
use crate::error::{check_len, Error, Result};

/// Two-layer quasi-geostrophic channel model.
///
/// Immutable after construction; all integration methods take `&self`.
#[derive(Debug, Clone)]
pub struct QgModel {
    cfg: QgConfig,
    grid: Grid,
    f1: f64,
    f2: f64,
    beta_hat: f64,
    d: f64,
    dt: f64,
    orography: OrographyField,
    walls: Walls,
    /// `q - Aψ`: planetary vorticity, orography and ghost-row terms.
    pv_offset: Vec<f64>,
    pub(crate) helmholtz: Helmholtz,
}

impl QgModel {
    /// Model with the default hill orography and walls taken from the zonal jet.
    pub fn new(cfg: QgConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = Grid::new(cfg.nx, cfg.ny);
        let oro = OrographyField::hill(grid, cfg.orography.amplitude, cfg.orography.radius);
        let (south, north) = jet_ghost_rows(&cfg);
        let mut m = Self::bare(cfg, oro, Walls::zeros(grid))?;
        m.walls.psi_south = south;
        m.walls.psi_north = north;
        m.rebuild_offset();
        let jet = m.jet_state();
        m.freeze_boundary_pv(&jet);
        Ok(m)
    }

    /// Model with explicit orography, ghost-row streamfunction and a state whose
    /// first and last PV rows become the frozen boundary values.
    pub fn with_boundary(
        cfg: QgConfig,
        orography: OrographyField,
        psi_south: Vec<f64>,
        psi_north: Vec<f64>,
        boundary_state: &QgState,
    ) -> Result<Self> {
        cfg.validate()?;
        let grid = Grid::new(cfg.nx, cfg.ny);
        check_len("orography", grid.layer_len(), orography.rs.len())?;
        check_len("south ghost row", 2 * grid.nx, psi_south.len())?;
        check_len("north ghost row", 2 * grid.nx, psi_north.len())?;
        let mut m = Self::bare(cfg, orography, Walls::zeros(grid))?;
        m.walls.psi_south = psi_south;
        m.walls.psi_north = psi_north;
        m.rebuild_offset();
        m.freeze_boundary_pv(boundary_state);
        Ok(m)
    }

    /// Zero ghost walls, boundary PV of the resting state.
    pub fn resting(cfg: QgConfig, orography: OrographyField) -> Result<Self> {
        let grid = Grid::new(cfg.nx, cfg.ny);
        let z = vec![0.0; 2 * grid.nx];
        Self::with_boundary(cfg, orography, z.clone(), z, &QgState::zeros(grid))
    }

    /// Same model with every x-dependent ingredient shifted by `shift` cells.
    pub fn shifted_x(&self, shift: usize) -> Self {
        let mut m = self.clone();
        m.orography = self.orography.shifted_x(shift);
        m.walls = self.walls.shifted_x(self.grid, shift);
        m.rebuild_offset();
        m
    }

    fn bare(cfg: QgConfig, orography: OrographyField, walls: Walls) -> Result<Self> {
        let grid = Grid::new(cfg.nx, cfg.ny);
        let (f1, f2) = cfg.coupling();
        let d = cfg.dx();
        let helmholtz = Helmholtz::new(grid, f1, f2, d)?;
        Ok(Self {
            beta_hat: cfg.beta_hat(),
            dt: cfg.dt_nondim(),
            cfg,
            grid,
            f1,
            f2,
            d,
            orography,
            walls,
            pv_offset: vec![0.0; grid.len()],
            helmholtz,
        })
    }

    fn rebuild_offset(&mut self) {
        let Grid { nx, ny } = self.grid;
        let inv_d2 = 1.0 / (self.d * self.d);
        for l in 0..2 {
            for j in 0..ny {
                let y = self.y_coord(j);
                for i in 0..nx {
                    let mut b = self.beta_hat * y;
                    if l == 1 {
                        b += self.orography.rs[j * nx + i];
                    }
                    if j == 0 {
                        b += inv_d2 * self.walls.psi_south[l * nx + i];
                    }
                    if j + 1 == ny {
                        b += inv_d2 * self.walls.psi_north[l * nx + i];
                    }
                    self.pv_offset[self.grid.idx(l, j, i)] = b;
                }
            }
        }
    }

    fn freeze_boundary_pv(&mut self, s: &QgState) {
        let q = self.pv_values(&s.psi);
        let Grid { nx, ny } = self.grid;
        for l in 0..2 {
            for i in 0..nx {
                self.walls.q_south[l * nx + i] = q[self.grid.idx(l, 0, i)];
                self.walls.q_north[l * nx + i] = q[self.grid.idx(l, ny - 1, i)];
            }
        }
    }

    pub fn config(&self) -> &QgConfig {
        &self.cfg
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn walls(&self) -> &Walls {
        &self.walls
    }

    pub fn orography(&self) -> &OrographyField {
        &self.orography
    }

    pub fn coupling(&self) -> (f64, f64) {
        (self.f1, self.f2)
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    /// Nondimensional grid spacing.
    pub fn spacing(&self) -> f64 {
        self.d
    }

    /// Nondimensional time step.
    pub fn dt_nondim(&self) -> f64 {
        self.dt
    }

    pub fn dt_seconds(&self) -> f64 {
        self.cfg.dt_seconds
    }

    /// Nondimensional y coordinate of row `j`, centred on the channel axis.
    pub fn y_coord(&self, j: usize) -> f64 {
        (j as f64 - (self.grid.ny as f64 - 1.0) / 2.0) * self.d
    }

    /// The zonal jet `ψ_l = -A_l tanh((y - y_c)/σ)` without noise.
    pub fn jet_state(&self) -> QgState {
        let Grid { nx, ny } = self.grid;
        let mut s = QgState::zeros(self.grid);
        for l in 0..2 {
            for j in 0..ny {
                let v = jet_value(&self.cfg, l, j as f64);
                for i in 0..nx {
                    s.psi[self.grid.idx(l, j, i)] = v;
                }
            }
        }
        s
    }

    fn pv_values(&self, psi: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; psi.len()];
        self.helmholtz.apply(psi, &mut q);
        q.iter_mut().zip(&self.pv_offset).for_each(|(a, b)| *a += b);
        q
    }

    fn check_state(&self, s: &QgState) -> Result<()> {
        if s.grid != self.grid {
            return Err(Error::Dimension { what: "state grid", expected: self.grid.len(), got: s.grid.len() });
        }
        check_len("state values", self.grid.len(), s.psi.len())
    }

    pub fn pv_from_psi(&self, s: &QgState) -> Result<PvField> {
        self.check_state(s)?;
        Ok(PvField { grid: self.grid, q: self.pv_values(&s.psi) })
    }

    /// Invert PV to streamfunction with this model's ghost-row walls.
    pub fn psi_from_pv(&self, q: &PvField, valid_time: f64) -> Result<QgState> {
        check_len("PV values", self.grid.len(), q.q.len())?;
        if let Some(k) = q.q.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("PV field at index {k}")));
        }
        let rhs: Vec<f64> = q.q.iter().zip(&self.pv_offset).map(|(a, b)| a - b).collect();
        let mut psi = vec![0.0; rhs.len()];
        self.helmholtz.solve(&rhs, &mut psi);
        Ok(QgState { grid: self.grid, psi, valid_time })
    }

    /// One time step. Departure points outside the channel are clamped and flagged.
    pub fn step(&self, s: &QgState) -> Result<(QgState, StepRecord)> {
        self.check_state(s)?;
        let mut out = vec![0.0; s.psi.len()];
        let mut rec = StepRecord::default();
        self.advance(&s.psi, None, &mut out, Some(&mut rec));
        Ok((QgState { grid: self.grid, psi: out, valid_time: s.valid_time + self.cfg.dt_seconds }, rec))
    }

    /// Core step kernel: `out = N(psi) + forcing`.
    pub(crate) fn advance(&self, psi: &[f64], forcing: Option<&[f64]>, out: &mut [f64], rec: Option<&mut StepRecord>) {
        let Grid { nx, ny } = self.grid;
        let n = nx * ny;
        let q = self.pv_values(psi);
        let mut qn = vec![0.0; q.len()];
        let cx = self.dt / (2.0 * self.d * self.d);
        let ymax = (ny - 1) as f64;
        let mut stencils = match rec {
            Some(_) => Vec::with_capacity(2 * (ny - 2) * nx),
            None => Vec::new(),
        };
        let mut clamped = Vec::new();
        let keep = stencils.capacity() > 0;
        for l in 0..2 {
            let base = l * n;
            for j in 0..ny {
                if j == 0 || j + 1 == ny {
                    let wall = if j == 0 { &self.walls.q_south } else { &self.walls.q_north };
                    qn[base + j * nx..base + (j + 1) * nx].copy_from_slice(&wall[l * nx..(l + 1) * nx]);
                    continue;
                }
                for i in 0..nx {
                    let k = base + j * nx + i;
                    let ip = if i + 1 == nx { 0 } else { i + 1 };
                    let im = if i == 0 { nx - 1 } else { i - 1 };
                    // displacement in cells: dt*u/d with u = -dψ/dy, v = dψ/dx
                    let ax = -(psi[k + nx] - psi[k - nx]) * cx;
                    let ay = (psi[base + j * nx + ip] - psi[base + j * nx + im]) * cx;
                    let mut yd = j as f64 - ay;
                    let mut clamp = false;
                    if yd < 0.0 {
                        yd = 0.0;
                        clamp = true;
                    } else if yd > ymax {
                        yd = ymax;
                        clamp = true;
                    }
                    let st = Stencil::new(base, nx, ny, i, -ax, yd, &q, clamp);
                    qn[k] = st.interp(&q);
                    if keep {
                        if clamp {
                            clamped.push(k as u32);
                        }
                        stencils.push(st);
                    }
                }
            }
        }
        self.helmholtz.solve(&sub(&qn, &self.pv_offset), out);
        if let Some(w) = forcing {
            out.iter_mut().zip(w).for_each(|(a, b)| *a += b);
        }
        if let Some(r) = rec {
            r.stencils = stencils;
            r.clamped = clamped;
        }
    }

    /// Integrate `n_steps` without recording, adding `forcing` after every step.
    pub fn integrate(&self, s: &QgState, n_steps: usize, forcing: Option<&[f64]>) -> Result<QgState> {
        self.check_state(s)?;
        if let Some(w) = forcing {
            check_len("forcing", self.grid.len(), w.len())?;
        }
        let mut cur = s.psi.clone();
        let mut next = vec![0.0; cur.len()];
        for _ in 0..n_steps {
            self.advance(&cur, forcing, &mut next, None);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(QgState { grid: self.grid, psi: cur, valid_time: s.valid_time + n_steps as f64 * self.cfg.dt_seconds })
    }

    /// Unforced resolvent from `t0` to `t1` (seconds), recording a tape.
    pub fn resolvent(&self, s: &QgState, t0: f64, t1: f64) -> Result<(QgState, TrajectoryTape)> {
        self.resolvent_inner(None, s, t0, t1)
    }

    /// Resolvent of the `w`-forced model: `w` is added after every model step.
    pub fn resolvent_forced(&self, w: &[f64], s: &QgState, t0: f64, t1: f64) -> Result<(QgState, TrajectoryTape)> {
        check_len("forcing", self.grid.len(), w.len())?;
        self.resolvent_inner(Some(w), s, t0, t1)
    }

    fn resolvent_inner(&self, w: Option<&[f64]>, s: &QgState, t0: f64, t1: f64) -> Result<(QgState, TrajectoryTape)> {
        self.check_state(s)?;
        let n = self.cfg.steps_in(t1 - t0)?;
        let mut states = Vec::with_capacity(n + 1);
        let mut records = Vec::with_capacity(n);
        let mut cur = QgState { grid: self.grid, psi: s.psi.clone(), valid_time: t0 };
        states.push(cur.clone());
        for _ in 0..n {
            let mut out = vec![0.0; cur.psi.len()];
            let mut rec = StepRecord::default();
            self.advance(&cur.psi, w, &mut out, Some(&mut rec));
            cur = QgState { grid: self.grid, psi: out, valid_time: cur.valid_time + self.cfg.dt_seconds };
            records.push(rec);
            states.push(cur.clone());
        }
        if !cur.is_finite() {
            return Err(Error::NonFinite(format!("trajectory ending at t = {} s", cur.valid_time)));
        }
        Ok((cur, TrajectoryTape { dt_seconds: self.cfg.dt_seconds, states, records }))
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn jet_value(cfg: &QgConfig, layer: usize, y_rows: f64) -> f64 {
    let yc = (cfg.ny as f64 - 1.0) / 2.0;
    -cfg.jet.amplitudes[layer] * ((y_rows - yc) / cfg.jet_width()).tanh()
}

fn jet_ghost_rows(cfg: &QgConfig) -> (Vec<f64>, Vec<f64>) {
    let nx = cfg.nx;
    let mut s = vec![0.0; 2 * nx];
    let mut n = vec![0.0; 2 * nx];
    for l in 0..2 {
        let vs = jet_value(cfg, l, -1.0);
        let vn = jet_value(cfg, l, cfg.ny as f64);
        for i in 0..nx {
            s[l * nx + i] = vs;
            n[l * nx + i] = vn;
        }
    }
    (s, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(model: &QgModel, amp: f64, seed: u64) -> QgState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = model.jet_state();
        s.psi.iter_mut().for_each(|v| *v += amp * rng.random_range(-1.0..1.0));
        s
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn rest_state_pv_is_planetary() {
        let cfg = QgConfig::reference();
        let g = Grid::new(cfg.nx, cfg.ny);
        let m = QgModel::resting(cfg, OrographyField::zeros(g)).unwrap();
        let q = m.pv_from_psi(&QgState::zeros(g)).unwrap();
        for l in 0..2 {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    assert!((q.q[g.idx(l, j, i)] - m.beta_hat() * m.y_coord(j)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn constant_state_has_no_coupling() {
        // with ghost rows equal to the constant, q - βy - rs vanishes
        let cfg = QgConfig::reference();
        let g = Grid::new(cfg.nx, cfg.ny);
        let c = 0.7;
        let oro = OrographyField::hill(g, 0.1, 3.0);
        let s = QgState::new(g, vec![c; g.len()], 0.0).unwrap();
        let m = QgModel::with_boundary(cfg, oro.clone(), vec![c; 2 * g.nx], vec![c; 2 * g.nx], &s).unwrap();
        let q = m.pv_from_psi(&s).unwrap();
        for l in 0..2 {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let mut r = q.q[g.idx(l, j, i)] - m.beta_hat() * m.y_coord(j);
                    if l == 1 {
                        r -= oro.rs[j * g.nx + i];
                    }
                    assert!(r.abs() < 1e-12, "{r}");
                }
            }
        }
    }

    #[test]
    fn single_mode_matches_dense_laplacian() {
        // dense Laplacian assembled entry by entry, independent of the stencil loops
        let cfg = QgConfig::reference().with_grid(8, 4);
        let g = Grid::new(8, 4);
        let m = QgModel::resting(cfg, OrographyField::zeros(g)).unwrap();
        let d = m.spacing();
        let (f1, _) = m.coupling();
        let n = g.layer_len();
        let mut lap = vec![0.0; n * n];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let r = j * g.nx + i;
                lap[r * n + r] = -4.0 / (d * d);
                for (jj, ii) in [
                    (j as i64, i as i64 + 1),
                    (j as i64, i as i64 - 1),
                    (j as i64 + 1, i as i64),
                    (j as i64 - 1, i as i64),
                ] {
                    if jj < 0 || jj >= g.ny as i64 {
                        continue;
                    }
                    let c = jj as usize * g.nx + ii.rem_euclid(g.nx as i64) as usize;
                    lap[r * n + c] += 1.0 / (d * d);
                }
            }
        }
        let mut s = QgState::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                s.psi[g.idx(0, j, i)] = (2.0 * std::f64::consts::PI * i as f64 / g.nx as f64).sin();
            }
        }
        let q = m.pv_from_psi(&s).unwrap();
        for r in 0..n {
            let lp: f64 = (0..n).map(|c| lap[r * n + c] * s.psi[c]).sum();
            let j = r / g.nx;
            let expect = lp - f1 * s.psi[r] + m.beta_hat() * m.y_coord(j);
            assert!((q.q[r] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pv_round_trip() {
        let m = QgModel::new(QgConfig::reference()).unwrap();
        let s = noisy(&m, 0.3, 5);
        let q = m.pv_from_psi(&s).unwrap();
        let back = m.psi_from_pv(&q, 0.0).unwrap();
        let norm = s.psi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = s.psi.iter().zip(&back.psi).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err / norm < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = PvField { grid: m.grid(), q: (0..m.grid().len()).map(|_| rng.random_range(-3.0..3.0)).collect() };
        let psi = m.psi_from_pv(&q, 0.0).unwrap();
        let q2 = m.pv_from_psi(&psi).unwrap();
        let qn = q.q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let res = q.q.iter().zip(&q2.q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(res / qn < 1e-10, "{}", res / qn);
    }

    #[test]
    fn planetary_pv_inverts_to_rest() {
        let cfg = QgConfig::reference();
        let g = Grid::new(cfg.nx, cfg.ny);
        let m = QgModel::resting(cfg, OrographyField::zeros(g)).unwrap();
        let q = m.pv_from_psi(&QgState::zeros(g)).unwrap();
        let s = m.psi_from_pv(&q, 0.0).unwrap();
        assert!(s.psi.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn psi_from_pv_rejects_nan() {
        let m = QgModel::new(QgConfig::reference()).unwrap();
        let mut q = m.pv_from_psi(&m.jet_state()).unwrap();
        q.q[7] = f64::NAN;
        assert!(matches!(m.psi_from_pv(&q, 0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn rest_is_steady() {
        let cfg = QgConfig::reference();
        let g = Grid::new(cfg.nx, cfg.ny);
        let m = QgModel::resting(cfg, OrographyField::zeros(g)).unwrap();
        let (s1, _) = m.step(&QgState::zeros(g)).unwrap();
        assert!(s1.psi.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(s1.valid_time, 600.0);
    }

    #[test]
    fn zonal_jet_is_steady() {
        let cfg = QgConfig::reference();
        let g = Grid::new(cfg.nx, cfg.ny);
        let m = QgModel::new(cfg).unwrap();
        // flat bottom so the jet is an exact steady state
        let m = QgModel::with_boundary(
            m.config().clone(),
            OrographyField::zeros(g),
            m.walls().psi_south.clone(),
            m.walls().psi_north.clone(),
            &m.jet_state(),
        )
        .unwrap();
        let jet = m.jet_state();
        let (s1, _) = m.step(&jet).unwrap();
        assert!(max_abs_diff(&s1.psi, &jet.psi) < 1e-12);
    }

    #[test]
    fn step_converges_with_dt() {
        // compare one dt step to two dt/2 steps and four dt/4 steps: error ratio ~ first order or better
        let cfg = QgConfig::reference();
        let base = QgModel::new(cfg.clone()).unwrap();
        let s = noisy(&base, 0.05, 3);
        let mut errs = Vec::new();
        let fine = {
            let mut c = cfg.clone();
            c.dt_seconds = cfg.dt_seconds / 8.0;
            let m = QgModel::new(c).unwrap();
            m.integrate(&s, 8 * 4, None).unwrap()
        };
        for div in [1.0, 2.0] {
            let mut c = cfg.clone();
            c.dt_seconds = cfg.dt_seconds / div;
            let m = QgModel::new(c).unwrap();
            let out = m.integrate(&s, (4.0 * div) as usize, None).unwrap();
            errs.push(out.rmse(&fine));
        }
        assert!(errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn x_shift_equivariance() {
        let m = QgModel::new(QgConfig::reference()).unwrap();
        let s = noisy(&m, 0.1, 11);
        let shifted = m.shifted_x(3);
        let a = m.integrate(&s, 5, None).unwrap().shifted_x(3);
        let b = shifted.integrate(&s.shifted_x(3), 5, None).unwrap();
        assert_eq!(a.psi, b.psi);
    }

    #[test]
    fn forced_with_zero_equals_unforced() {
        let m = QgModel::new(QgConfig::perturbed()).unwrap();
        let s = noisy(&m, 0.1, 2);
        let z = vec![0.0; s.psi.len()];
        let (a, _) = m.resolvent(&s, 0.0, 7200.0).unwrap();
        let (b, _) = m.resolvent_forced(&z, &s, 0.0, 7200.0).unwrap();
        assert_eq!(a.psi, b.psi);
    }

    #[test]
    fn forced_single_step_adds_forcing() {
        let m = QgModel::new(QgConfig::perturbed()).unwrap();
        let s = noisy(&m, 0.1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w: Vec<f64> = (0..s.psi.len()).map(|_| rng.random_range(-0.01..0.01)).collect();
        let (a, _) = m.resolvent(&s, 0.0, 1200.0).unwrap();
        let (b, _) = m.resolvent_forced(&w, &s, 0.0, 1200.0).unwrap();
        for k in 0..w.len() {
            assert!((b.psi[k] - a.psi[k] - w[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn forced_matches_manual_unroll() {
        let m = QgModel::new(QgConfig::perturbed()).unwrap();
        let s = noisy(&m, 0.1, 2);
        let w = vec![0.003; s.psi.len()];
        let (b, _) = m.resolvent_forced(&w, &s, 0.0, 6.0 * 1200.0).unwrap();
        let mut cur = s.clone();
        for _ in 0..6 {
            let (mut nxt, _) = m.step(&cur).unwrap();
            nxt.psi.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
            cur = nxt;
        }
        assert!(max_abs_diff(&cur.psi, &b.psi) < 1e-12);
    }

    #[test]
    fn resolvent_identity_and_composition() {
        let m = QgModel::new(QgConfig::perturbed()).unwrap();
        let s = noisy(&m, 0.1, 8);
        let (same, tape) = m.resolvent(&s, 100.0, 100.0).unwrap();
        assert_eq!(same.psi, s.psi);
        assert!(tape.records.is_empty());
        let (two, tape) = m.resolvent(&s, 0.0, 2400.0).unwrap();
        let (a, _) = m.step(&s).unwrap();
        let (b, _) = m.step(&a).unwrap();
        assert_eq!(two.psi, b.psi);
        assert_eq!(tape.states.len(), 3);
        assert!(m.resolvent(&s, 0.0, 1000.0).is_err());
    }

    #[test]
    fn reference_and_perturbed_differ() {
        let r = QgModel::new(QgConfig::reference()).unwrap();
        let p = QgModel::new(QgConfig::perturbed()).unwrap();
        let s = noisy(&r, 0.1, 1);
        let a = r.integrate(&s, 144, None).unwrap();
        let b = p.integrate(&s, 72, None).unwrap();
        let d = a.rmse(&b);
        assert!(d > 0.0 && d < 1.0, "{d}");
    }
}
