//! Python bindings: parameters, grids, fields, regime classification,
//! simulation runs and the fitting/inequality utilities.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;

use crosstaxis::analysis::{fit_algebraic, fit_exponential, tail_window, RateFit};
use crosstaxis::config::parse_config;
use crosstaxis::experiment;
use crosstaxis::functionals::{cancellation_residuals, weights_for_regime};
use crosstaxis::grid;
use crosstaxis::inequalities::{self, TestFieldSpec};
use crosstaxis::model;

fn err(e: crosstaxis::Error) -> PyErr {
    if e.exit_code() == 1 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Kinetic and transport coefficients of the two-species system.
#[pyclass(name = "Parameters", from_py_object)]
#[derive(Clone)]
struct PyParameters {
    inner: model::Parameters,
}

#[pymethods]
impl PyParameters {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = model::Parameters::default();
        if let Some(kwargs) = kwargs {
            for (key, value) in kwargs.iter() {
                let name: String = key.extract()?;
                let v: f64 = value.extract()?;
                match name.as_str() {
                    "d1" => p.d1 = v,
                    "d2" => p.d2 = v,
                    "chi1" => p.chi1 = v,
                    "chi2" => p.chi2 = v,
                    "lambda1" => p.lambda1 = v,
                    "lambda2" => p.lambda2 = v,
                    "mu1" => p.mu1 = v,
                    "mu2" => p.mu2 = v,
                    "a1" => p.a1 = v,
                    "a2" => p.a2 = v,
                    "m1" => p.m1 = v,
                    "m2" => p.m2 = v,
                    other => {
                        return Err(PyValueError::new_err(format!(
                            "unknown parameter '{other}'"
                        )))
                    }
                }
            }
        }
        p.validate().map_err(err)?;
        Ok(PyParameters { inner: p })
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    fn as_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        let p = &self.inner;
        for (k, v) in [
            ("d1", p.d1),
            ("d2", p.d2),
            ("chi1", p.chi1),
            ("chi2", p.chi2),
            ("lambda1", p.lambda1),
            ("lambda2", p.lambda2),
            ("mu1", p.mu1),
            ("mu2", p.mu2),
            ("a1", p.a1),
            ("a2", p.a2),
            ("m1", p.m1),
            ("m2", p.m2),
        ] {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Cell-centered zero-flux grid.
#[pyclass(name = "Grid", from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: grid::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(shape: Vec<usize>, lengths: Vec<f64>) -> PyResult<Self> {
        Ok(PyGrid {
            inner: grid::Grid::new(&shape, &lengths).map_err(err)?,
        })
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn lengths(&self) -> Vec<f64> {
        self.inner.lengths().to_vec()
    }

    #[getter]
    fn spacing(&self) -> Vec<f64> {
        self.inner.spacing().to_vec()
    }

    fn num_cells(&self) -> usize {
        self.inner.num_cells()
    }

    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    fn poincare_constant(&self) -> f64 {
        inequalities::poincare_constant(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Grid(shape={:?}, lengths={:?})", self.shape(), self.lengths())
    }
}

/// Scalar field with grid quadrature and zero-flux difference operators.
#[pyclass(name = "Field", from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: grid::Field,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(PyField {
            inner: grid::Field::from_values(&grid.inner, values).map_err(err)?,
        })
    }

    #[staticmethod]
    fn constant(grid: &PyGrid, value: f64) -> Self {
        PyField {
            inner: grid::Field::constant(&grid.inner, value),
        }
    }

    #[staticmethod]
    fn cosine_mode(grid: &PyGrid, k: Vec<usize>) -> PyResult<Self> {
        Ok(PyField {
            inner: grid::cosine_mode(&grid.inner, &k).map_err(err)?,
        })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn integrate(&self) -> f64 {
        self.inner.integrate()
    }

    fn laplacian(&self) -> Self {
        PyField {
            inner: self.inner.laplacian(),
        }
    }

    fn norms<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let n = self.inner.norms();
        let d = PyDict::new(py);
        d.set_item("l2", n.l2)?;
        d.set_item("linf", n.linf)?;
        d.set_item("h1_seminorm", n.h1_seminorm)?;
        d.set_item("laplacian_l2", n.laplacian_l2)?;
        d.set_item("grad_laplacian_l2", n.grad_laplacian_l2)?;
        d.set_item("w22_equiv", n.w22_equiv)?;
        d.set_item("mean", n.mean)?;
        Ok(d)
    }
}

/// Classifies the parameter regime; returns the tag and the kinetic
/// discriminant.
#[pyfunction]
fn classify<'py>(
    py: Python<'py>,
    params: &PyParameters,
) -> PyResult<Bound<'py, PyDict>> {
    let regime = model::classify_regime(&params.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("tag", regime.tag.to_string())?;
    d.set_item("discriminant", regime.discriminant)?;
    Ok(d)
}

/// The homogeneous equilibrium for the given domain volume.
#[pyfunction]
#[pyo3(signature = (params, volume=1.0))]
fn steady_state(params: &PyParameters, volume: f64) -> PyResult<(f64, f64)> {
    let s = model::steady_state(&params.inner, volume).map_err(err)?;
    Ok((s.u_star, s.v_star))
}

/// Kinetic Jacobian at the equilibrium.
#[pyfunction]
#[pyo3(signature = (params, volume=1.0))]
fn jacobian<'py>(
    py: Python<'py>,
    params: &PyParameters,
    volume: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = model::steady_state(&params.inner, volume).map_err(err)?;
    let j = model::jacobian_at_steady_state(&params.inner, &s).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("fu", j.fu)?;
    d.set_item("fv", j.fv)?;
    d.set_item("gu", j.gu)?;
    d.set_item("gv", j.gv)?;
    Ok(d)
}

/// Regime-specific composite-functional weights plus their cross-term
/// cancellation residuals.
#[pyfunction]
#[pyo3(signature = (params, volume=1.0, poincare_constant=0.1))]
fn weights<'py>(
    py: Python<'py>,
    params: &PyParameters,
    volume: f64,
    poincare_constant: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = &params.inner;
    let regime = model::classify_regime(p).map_err(err)?;
    let s = model::steady_state(p, volume).map_err(err)?;
    let w = weights_for_regime(p, &s, &regime, poincare_constant).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("l2_u", w.l2_u)?;
    d.set_item("l2_v", w.l2_v)?;
    d.set_item("grad_u", w.grad_u)?;
    d.set_item("grad_v", w.grad_v)?;
    d.set_item("lap_u", w.lap_u)?;
    d.set_item("lap_v", w.lap_v)?;
    d.set_item(
        "cancellation_residuals",
        cancellation_residuals(&w, p, &s).to_vec(),
    )?;
    Ok(d)
}

fn fit_to_dict<'py>(py: Python<'py>, fit: &RateFit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("model", format!("{:?}", fit.model).to_lowercase())?;
    d.set_item("k1", fit.k1)?;
    d.set_item("k2", fit.k2)?;
    d.set_item("residual", fit.residual)?;
    Ok(d)
}

/// Fits both decay laws to a (t, distance) series on the tail window.
#[pyfunction]
fn fit_decay<'py>(
    py: Python<'py>,
    t: Vec<f64>,
    d: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    if t.len() != d.len() {
        return Err(PyValueError::new_err("t and d must have equal length"));
    }
    let series: Vec<(f64, f64)> = t.into_iter().zip(d).collect();
    let tail = tail_window(&series);
    let out = PyDict::new(py);
    match fit_exponential(&tail) {
        Ok(f) => out.set_item("exponential", fit_to_dict(py, &f)?)?,
        Err(_) => out.set_item("exponential", py.None())?,
    }
    match fit_algebraic(&tail) {
        Ok(f) => out.set_item("algebraic", fit_to_dict(py, &f)?)?,
        Err(_) => out.set_item("algebraic", py.None())?,
    }
    Ok(out)
}

/// Runs one configured simulation; `config` is TOML text (empty for the
/// defaults), `overrides` are dotted KEY=VALUE paths. Writes the artifact
/// files and returns the recorded series plus summary facts.
#[pyfunction]
#[pyo3(signature = (config="", overrides=vec![], out_dir=None))]
fn run_simulation<'py>(
    py: Python<'py>,
    config: &str,
    overrides: Vec<String>,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config, &overrides).map_err(err)?;
    let out_dir =
        out_dir.unwrap_or_else(|| PathBuf::from(cfg.outputs.directory.clone()));
    let res = experiment::run_simulate(&cfg, &out_dir).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("config_hash", &res.summary.config_hash)?;
    d.set_item("regime", res.summary.regime.tag.to_string())?;
    d.set_item(
        "steady_state",
        (res.summary.steady_state.u_star, res.summary.steady_state.v_star),
    )?;
    d.set_item("eta", res.summary.eta)?;
    d.set_item("exit_time", res.summary.exit_time)?;
    d.set_item("monotone", res.summary.monotone_passed)?;
    if let Some(sel) = &res.summary.selection {
        d.set_item("winner", format!("{:?}", sel.winner).to_lowercase())?;
    }
    let series = PyDict::new(py);
    let recs = &res.series.records;
    series.set_item("t", recs.iter().map(|r| r.t).collect::<Vec<_>>())?;
    series.set_item("y", recs.iter().map(|r| r.y).collect::<Vec<_>>())?;
    series.set_item(
        "mass_u",
        recs.iter().map(|r| r.mass_u).collect::<Vec<_>>(),
    )?;
    series.set_item(
        "mass_v",
        recs.iter().map(|r| r.mass_v).collect::<Vec<_>>(),
    )?;
    series.set_item(
        "distance",
        recs.iter().map(|r| r.w22_u + r.w22_v).collect::<Vec<_>>(),
    )?;
    d.set_item("series", series)?;
    d.set_item(
        "files",
        res.files
            .iter()
            .map(|f| f.display().to_string())
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Empirical maxima of the monitored inequality ratios over seeded random
/// fields, with the refined-grid trend.
#[pyfunction]
#[pyo3(signature = (grid, seed=0, max_mode=8, decay=2.0, count=100))]
fn inequality_constants<'py>(
    py: Python<'py>,
    grid: &PyGrid,
    seed: u64,
    max_mode: usize,
    decay: f64,
    count: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let spec = TestFieldSpec {
        seed,
        max_mode,
        decay,
        count,
    };
    let reports =
        inequalities::estimate_constants(&spec, &grid.inner).map_err(err)?;
    reports
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("inequality", r.id.name())?;
            d.set_item("max_ratio", r.max_ratio)?;
            d.set_item("max_ratio_refined", r.max_ratio_refined)?;
            d.set_item("argmax_sample", r.argmax_sample)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn crosstaxis_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParameters>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(weights, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(inequality_constants, m)?)?;
    Ok(())
}
