use super::state::QgState;

/// Bilinear interpolation stencil at one departure point, with the gradient of
/// the interpolant of the advected PV at that point.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub idx: [u32; 4],
    pub wts: [f64; 4],
    /// ∂q/∂x at the departure point (per cell).
    pub gx: f64,
    /// ∂q/∂y at the departure point; zero when the point was clamped to a wall.
    pub gy: f64,
}

impl Stencil {
    /// Stencil in layer starting at `base` for the departure point at column
    /// `i + dx` and row `y`, in cell units. The offset is kept relative to `i` so
    /// the weights do not depend on the column index.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(base: usize, nx: usize, ny: usize, i: usize, dx: f64, y: f64, q: &[f64], clamped: bool) -> Self {
        // floor through integer casts: `f64::floor` is a libm call on baseline x86-64
        let t = dx as i64;
        let x0 = if (t as f64) > dx { t - 1 } else { t };
        let fx = dx - x0 as f64;
        let mut i0 = i as i64 + x0;
        let n = nx as i64;
        if !(0..n).contains(&i0) {
            i0 = i0.rem_euclid(n);
        }
        let i0 = i0 as usize;
        let i1 = if i0 + 1 == nx { 0 } else { i0 + 1 };
        // y >= 0, so truncation is the floor
        let j0 = (y as usize).min(ny - 2);
        let fy = y - j0 as f64;
        let r0 = base + j0 * nx;
        let r1 = r0 + nx;
        let idx = [(r0 + i0) as u32, (r0 + i1) as u32, (r1 + i0) as u32, (r1 + i1) as u32];
        let wts = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        let q00 = q[r0 + i0];
        let q10 = q[r0 + i1];
        let q01 = q[r1 + i0];
        let q11 = q[r1 + i1];
        let gx = (1.0 - fy) * (q10 - q00) + fy * (q11 - q01);
        let gy = if clamped { 0.0 } else { (1.0 - fx) * (q01 - q00) + fx * (q11 - q10) };
        Self { idx, wts, gx, gy }
    }

    #[inline]
    pub fn interp(&self, f: &[f64]) -> f64 {
        self.wts[0] * f[self.idx[0] as usize]
            + self.wts[1] * f[self.idx[1] as usize]
            + self.wts[2] * f[self.idx[2] as usize]
            + self.wts[3] * f[self.idx[3] as usize]
    }
}

/// Linearisation data of one model step.
#[derive(Debug, Clone, Default)]
pub struct StepRecord {
    /// One stencil per advected point, interior rows only, in layer/row/column order.
    pub stencils: Vec<Stencil>,
    /// Flat indices of points whose departure point left the channel.
    pub clamped: Vec<u32>,
}

/// States and step records of a nonlinear integration.
#[derive(Debug, Clone)]
pub struct TrajectoryTape {
    pub dt_seconds: f64,
    /// `n_steps + 1` states, starting with the initial condition.
    pub states: Vec<QgState>,
    pub records: Vec<StepRecord>,
}

impl TrajectoryTape {
    pub fn n_steps(&self) -> usize {
        self.records.len()
    }

    pub fn final_state(&self) -> &QgState {
        self.states.last().expect("tape always holds the initial state")
    }

    /// Total number of clamped departure points over the run.
    pub fn clamp_count(&self) -> usize {
        self.records.iter().map(|r| r.clamped.len()).sum()
    }
}
