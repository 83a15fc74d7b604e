//! Python bindings for the nnvar toolkit.

use std::path::Path;

use nnvar::error::Error;
use nnvar::experiments::tables::{parse_cycle_table, parse_forecast_table};
use nnvar::io::{Checkpoint, RunConfig};
use nnvar::qg::{QgConfig, QgState};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        2 => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Two-layer QG model on a periodic channel; states are flat `psi` lists of length 2·ny·nx.
#[pyclass(name = "QgModel", frozen)]
struct PyQgModel {
    inner: nnvar::qg::QgModel,
}

#[pymethods]
impl PyQgModel {
    #[new]
    #[pyo3(signature = (setup = "reference", nx = 40, ny = 20))]
    fn new(setup: &str, nx: usize, ny: usize) -> PyResult<Self> {
        let cfg = match setup {
            "reference" => QgConfig::reference(),
            "perturbed" => QgConfig::perturbed(),
            other => return Err(PyValueError::new_err(format!("unknown setup {other:?}"))),
        };
        let inner = nnvar::qg::QgModel::new(cfg.with_grid(nx, ny)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let g = self.inner.grid();
        (2, g.ny, g.nx)
    }

    #[getter]
    fn dt_seconds(&self) -> f64 {
        self.inner.dt_seconds()
    }

    fn jet_state(&self) -> Vec<f64> {
        self.inner.jet_state().psi
    }

    /// Advance `psi` by `steps` model steps, optionally with a constant additive forcing.
    #[pyo3(signature = (psi, steps, forcing = None))]
    fn integrate(&self, py: Python<'_>, psi: Vec<f64>, steps: usize, forcing: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        let s = QgState::new(self.inner.grid(), psi, 0.0).map_err(to_py)?;
        let out = py.detach(|| self.inner.integrate(&s, steps, forcing.as_deref())).map_err(to_py)?;
        Ok(out.psi)
    }

    fn pv(&self, psi: Vec<f64>) -> PyResult<Vec<f64>> {
        let s = QgState::new(self.inner.grid(), psi, 0.0).map_err(to_py)?;
        Ok(self.inner.pv_from_psi(&s).map_err(to_py)?.q)
    }
}

/// Run the command-line tool with `args` (without the program name); returns the exit code.
#[pyfunction]
fn run(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("nnvar".to_string()).chain(args).collect();
    py.detach(|| nnvar::cli::run(argv))
}

/// The built-in run configuration as TOML text.
#[pyfunction]
fn default_config() -> PyResult<String> {
    RunConfig::default().to_toml().map_err(to_py)
}

/// Parse and validate a run configuration; returns it re-serialized with defaults filled in.
#[pyfunction]
fn check_config(text: &str) -> PyResult<String> {
    let cfg = RunConfig::from_toml(text).map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    cfg.to_toml().map_err(to_py)
}

#[pyfunction]
fn read_checkpoint<'py>(py: Python<'py>, path: &str) -> PyResult<Bound<'py, PyDict>> {
    let ck = Checkpoint::read(Path::new(path)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("name", ck.name)?;
    d.set_item("shape", ck.shape)?;
    d.set_item("time_seconds", ck.time_seconds)?;
    let extra = PyDict::new(py);
    for (k, v) in ck.extra {
        extra.set_item(k, v)?;
    }
    d.set_item("extra", extra)?;
    d.set_item("data", ck.data)?;
    Ok(d)
}

/// Rows of a per-cycle RMSE table as `(cycle, fg_rmse, an_rmse, cost_total, inner_iters)`.
#[pyfunction]
fn read_cycle_table(path: &str) -> PyResult<Vec<(usize, f64, f64, f64, usize)>> {
    let p = Path::new(path);
    let text = nnvar::io::read_text(p).map_err(to_py)?;
    let rows = parse_cycle_table(&text, p).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.cycle, r.fg_rmse, r.an_rmse, r.cost_total, r.inner_iters)).collect())
}

/// Rows of a forecast table as `(launch_cycle, lead_hours, rmse)`.
#[pyfunction]
fn read_forecast_table(path: &str) -> PyResult<Vec<(usize, f64, f64)>> {
    let p = Path::new(path);
    let text = nnvar::io::read_text(p).map_err(to_py)?;
    let recs = parse_forecast_table(&text, p).map_err(to_py)?;
    Ok(recs.iter().flat_map(|r| (0..r.rmse.len()).map(move |k| (r.launch_cycle, r.lead_hours(k), r.rmse[k]))).collect())
}

#[pymodule]
fn nnvar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQgModel>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(check_config, m)?)?;
    m.add_function(wrap_pyfunction!(read_checkpoint, m)?)?;
    m.add_function(wrap_pyfunction!(read_cycle_table, m)?)?;
    m.add_function(wrap_pyfunction!(read_forecast_table, m)?)?;
    Ok(())
}
