//! Tangent-linear and adjoint of the semi-Lagrangian step, linearised about a
//! recorded trajectory.

use super::model::QgModel;
use super::tape::{StepRecord, TrajectoryTape};
use crate::error::{check_len, Error, Result};

impl QgModel {
    /// TL of one step: `out = M dpsi`.
    pub(crate) fn step_tl(&self, rec: &StepRecord, dpsi: &[f64], out: &mut [f64]) {
        let g = self.grid();
        let (nx, ny) = (g.nx, g.ny);
        let n = nx * ny;
        let d = self.spacing();
        let cx = self.dt_nondim() / (2.0 * d * d);
        let mut dq = vec![0.0; dpsi.len()];
        self.helmholtz.apply(dpsi, &mut dq);
        let mut dqn = vec![0.0; dpsi.len()];
        let mut s = 0;
        for l in 0..2 {
            let base = l * n;
            for j in 1..ny - 1 {
                let row = base + j * nx;
                for i in 0..nx {
                    let k = row + i;
                    let st = &rec.stencils[s];
                    s += 1;
                    let ip = if i + 1 == nx { 0 } else { i + 1 };
                    let im = if i == 0 { nx - 1 } else { i - 1 };
                    // departure x = i - ax, y = j - ay
                    let dax = -(dpsi[k + nx] - dpsi[k - nx]) * cx;
                    let day = (dpsi[row + ip] - dpsi[row + im]) * cx;
                    dqn[k] = st.interp(&dq) - st.gx * dax - st.gy * day;
                }
            }
        }
        self.helmholtz.solve(&dqn, out);
    }

    /// Adjoint of one step: `out = Mᵀ adj`.
    pub(crate) fn step_ad(&self, rec: &StepRecord, adj: &[f64], out: &mut [f64]) {
        let g = self.grid();
        let (nx, ny) = (g.nx, g.ny);
        let n = nx * ny;
        let d = self.spacing();
        let cx = self.dt_nondim() / (2.0 * d * d);
        let mut aqn = vec![0.0; adj.len()];
        self.helmholtz.solve_transpose(adj, &mut aqn);
        let mut aq = vec![0.0; adj.len()];
        let mut apsi = vec![0.0; adj.len()];
        let mut s = 0;
        for l in 0..2 {
            let base = l * n;
            for j in 1..ny - 1 {
                let row = base + j * nx;
                for i in 0..nx {
                    let k = row + i;
                    let st = &rec.stencils[s];
                    s += 1;
                    let a = aqn[k];
                    for c in 0..4 {
                        aq[st.idx[c] as usize] += st.wts[c] * a;
                    }
                    let adax = -st.gx * a * cx;
                    let aday = -st.gy * a * cx;
                    let ip = if i + 1 == nx { 0 } else { i + 1 };
                    let im = if i == 0 { nx - 1 } else { i - 1 };
                    apsi[k + nx] -= adax;
                    apsi[k - nx] += adax;
                    apsi[row + ip] += aday;
                    apsi[row + im] -= aday;
                }
            }
        }
        self.helmholtz.apply_transpose(&aq, out);
        out.iter_mut().zip(&apsi).for_each(|(o, a)| *o += a);
    }

    /// Tangent-linear of the forced resolvent about `tape`:
    /// `dx_k = M_{k:k-1} dx_{k-1} + dw`. Returns `dx_0 ..= dx_n`.
    pub fn tangent_linear(&self, tape: &TrajectoryTape, dx: &[f64], dw: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
        let len = self.grid().len();
        check_len("state increment", len, dx.len())?;
        if let Some(w) = dw {
            check_len("forcing increment", len, w.len())?;
        }
        self.check_tape(tape)?;
        let mut out = Vec::with_capacity(tape.n_steps() + 1);
        out.push(dx.to_vec());
        for rec in &tape.records {
            let mut next = vec![0.0; len];
            self.step_tl(rec, out.last().unwrap(), &mut next);
            if let Some(w) = dw {
                next.iter_mut().zip(w).for_each(|(a, b)| *a += b);
            }
            out.push(next);
        }
        Ok(out)
    }

    /// Adjoint of [`tangent_linear`](Self::tangent_linear).
    ///
    /// `forcing[k]` is the adjoint input injected at time level `k` (length `n + 1`;
    /// empty vectors are treated as zero). Returns the adjoint of the initial
    /// increment and the accumulated adjoint of the constant forcing.
    pub fn adjoint(&self, tape: &TrajectoryTape, forcing: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let len = self.grid().len();
        self.check_tape(tape)?;
        check_len("adjoint forcing levels", tape.n_steps() + 1, forcing.len())?;
        for f in forcing {
            if !f.is_empty() {
                check_len("adjoint forcing", len, f.len())?;
            }
        }
        let n = tape.n_steps();
        let mut lam = vec![0.0; len];
        let mut wt = vec![0.0; len];
        add_into(&mut lam, &forcing[n]);
        for k in (1..=n).rev() {
            wt.iter_mut().zip(&lam).for_each(|(a, b)| *a += b);
            let mut prev = vec![0.0; len];
            self.step_ad(&tape.records[k - 1], &lam, &mut prev);
            lam = prev;
            add_into(&mut lam, &forcing[k - 1]);
        }
        Ok((lam, wt))
    }

    fn check_tape(&self, tape: &TrajectoryTape) -> Result<()> {
        let g = self.grid();
        let expected = 2 * (g.ny - 2) * g.nx;
        if let Some(r) = tape.records.iter().find(|r| r.stencils.len() != expected) {
            return Err(Error::Dimension { what: "tape stencils", expected, got: r.stencils.len() });
        }
        Ok(())
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    if !b.is_empty() {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    }
}
