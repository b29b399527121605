//! Python bindings for memkern.
//!
//! Measures and configs cross the boundary as JSON text with the same schema
//! the CLI reads; results come back as floats, lists and dicts.

use std::path::Path;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use memkern::geometry;
use memkern::harnack::{self, HarnackConfig};
use memkern::kernels;
use memkern::solver::{Boundary, SpatialGrid};
use memkern::volterra;

fn to_py(err: memkern::Error) -> PyErr {
    use memkern::Error::*;
    match err {
        Validation(_) | Domain(_) | Parse(_) | GridMismatch(_) | EmptyCylinder(_) | TooFewLevels(_) => {
            PyValueError::new_err(err.to_string())
        }
        Io(_) | Csv(_) => PyIOError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A validated order measure μ on (0,1).
///
/// ```python
/// m = Measure([(0.3, 0.5), (0.7, 0.5)])
/// m.l(0.1), m.phi(0.25)
/// ```
#[pyclass(frozen)]
struct Measure {
    inner: memkern::Measure,
}

#[pymethods]
impl Measure {
    /// Atoms as (alpha, q) pairs with strictly increasing alpha; `weight` adds
    /// a constant density on (0,1).
    #[new]
    #[pyo3(signature = (atoms=Vec::new(), weight=None))]
    fn new(atoms: Vec<(f64, f64)>, weight: Option<f64>) -> PyResult<Self> {
        let mut spec = memkern::MeasureSpec::atoms(&atoms);
        if let Some(w) = weight {
            spec = spec.with_weight(memkern::WeightDensity::uniform(w));
        }
        Ok(Self {
            inner: memkern::Measure::new(spec).map_err(to_py)?,
        })
    }

    /// Parses the `measure` object of a config.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: memkern::MeasureSpec = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: memkern::Measure::new(spec).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(self.inner.spec()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn gamma_bar(&self) -> f64 {
        self.inner.gamma_bar()
    }

    fn k(&self, t: f64) -> PyResult<f64> {
        kernels::k_eval(&self.inner, t).map_err(to_py)
    }

    fn l(&self, t: f64) -> PyResult<f64> {
        kernels::l_eval(&self.inner, t).map_err(to_py)
    }

    fn r_theta(&self, t: f64, theta: f64) -> PyResult<f64> {
        kernels::r_theta_eval(&self.inner, t, theta).map_err(to_py)
    }

    fn phi(&self, r: f64) -> PyResult<f64> {
        geometry::phi(&self.inner, r).map_err(to_py)
    }

    /// (k∗l)(t_j) for t_j = jτ, j = 1..n.
    fn sonine_product(&self, step: f64, n: usize) -> PyResult<Vec<f64>> {
        volterra::sonine_product(&self.inner, step, n).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Measure(gamma_bar={})", self.inner.gamma_bar())
    }
}

/// A computed solution: one slice of cell values per time node.
#[pyclass(frozen)]
struct Solution {
    inner: memkern::SolutionField,
}

#[pymethods]
impl Solution {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values.clone()
    }

    #[getter]
    fn step(&self) -> f64 {
        self.inner.step
    }

    #[getter]
    fn m_matrix(&self) -> bool {
        self.inner.m_matrix
    }

    fn last(&self) -> Vec<f64> {
        self.inner.last().to_vec()
    }

    fn min(&self) -> f64 {
        self.inner.min()
    }

    fn max(&self) -> f64 {
        self.inner.max()
    }

    fn max_residual(&self) -> f64 {
        self.inner.max_residual()
    }

    fn __len__(&self) -> usize {
        self.inner.values.len()
    }
}

/// Solves the problem described by a config document; `experiment` may be
/// omitted.
#[pyfunction]
fn solve(config: &str) -> PyResult<Solution> {
    let mut config: memkern::ExperimentConfig =
        serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    config.experiment.get_or_insert(memkern::Experiment::Solve);
    config.validate().into_result().map_err(to_py)?;
    let problem = config.problem().map_err(to_py)?;
    Ok(Solution {
        inner: memkern::solve(&problem).map_err(to_py)?,
    })
}

/// u(t_j), j = 0..n, for ∂ₜ[k∗(u − u₀)] = −λu.
#[pyfunction]
#[pyo3(signature = (measure, lam, u0=1.0, horizon=1.0, n_steps=1024))]
fn relaxation(measure: &Measure, lam: f64, u0: f64, horizon: f64, n_steps: usize) -> PyResult<Vec<f64>> {
    let problem = memkern::Problem::relaxation(measure.inner.clone(), lam, u0, horizon, n_steps);
    let u = memkern::solve(&problem).map_err(to_py)?;
    Ok(u.values.iter().map(|slice| slice[0]).collect())
}

/// Runs a config end to end, writes its artifacts under `out_dir` and returns
/// the report together with the exit code the CLI would use.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &str, out_dir: &str) -> PyResult<Bound<'py, PyDict>> {
    let config = memkern::parse_config(config).map_err(to_py)?;
    let outcome = memkern::run(&config, Path::new(out_dir)).map_err(to_py)?;
    let result = PyDict::new(py);
    result.set_item("exit_code", outcome.exit_code)?;
    result.set_item("violations", outcome.violations)?;
    result.set_item("files", outcome.files)?;
    result.set_item("report", json_to_py(py, &outcome.report)?)?;
    Ok(result)
}

#[pyfunction]
fn critical_exponent(gamma_bar: f64, dim: usize) -> PyResult<f64> {
    memkern::critical_exponent(gamma_bar, dim).map_err(to_py)
}

/// Weak Harnack ratio of a 1D field given as time slices over [0, 1]; None
/// when the cylinder infimum vanishes.
#[pyfunction]
#[pyo3(signature = (values, step, measure, x0, r, t0=0.0, delta=0.5, tau=1.0, p=1.0))]
#[allow(clippy::too_many_arguments)]
fn weak_harnack_ratio(
    values: Vec<Vec<f64>>,
    step: f64,
    measure: &Measure,
    x0: f64,
    r: f64,
    t0: f64,
    delta: f64,
    tau: f64,
    p: f64,
) -> PyResult<Option<f64>> {
    let cells = values.first().map_or(0, Vec::len);
    let grid = SpatialGrid::interval(0.0, 1.0, cells, Boundary::NeumannZero, Boundary::NeumannZero);
    let field = memkern::SolutionField::from_slices(grid, step, values, vec![0.0; cells]).map_err(to_py)?;
    let cfg = HarnackConfig {
        t0,
        x0: vec![x0],
        r,
        delta,
        tau,
        p,
    };
    let report = harnack::weak_harnack_ratio(&field, &measure.inner, &cfg).map_err(to_py)?;
    Ok(report.ratio)
}

#[pymodule]
fn pymemkern(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Measure>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(relaxation, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(critical_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(weak_harnack_ratio, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
