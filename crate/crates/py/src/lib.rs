//! Python bindings: a thin surface over the core crate for interactive
//! exploration. Build with `cargo build -p liftlab-py`, then stage the
//! cdylib as `liftlab.so` on the Python path (see python/smoke_test.py).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use liftlab_core::catalog;
use liftlab_core::chart::{self, BundlePoint};
use liftlab_core::dynamics::{self, FlowStatus, IntegratorConfig};
use liftlab_core::sampling::sample_slashed;
use liftlab_core::semispray;
use liftlab_core::suite::{self, CriterionResult};

fn err(e: liftlab_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn status_label(status: &FlowStatus) -> String {
    match status {
        FlowStatus::Completed => "completed".into(),
        FlowStatus::RegularityLost { t } => format!("regularity_lost at t={t}"),
        FlowStatus::BlowUp { t } => format!("blow_up at t={t}"),
        FlowStatus::LeftChart { t } => format!("left_chart at t={t}"),
    }
}

fn trajectory_tuple(traj: dynamics::Trajectory) -> (Vec<f64>, Vec<Vec<f64>>, String) {
    let status = status_label(&traj.status);
    let points = traj.points.iter().map(|p| p.coords().to_vec()).collect();
    (traj.times, points, status)
}

fn criterion_dict(py: Python<'_>, r: &CriterionResult) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("index", r.index)?;
    d.set_item("name", r.name)?;
    d.set_item("passed", r.passed)?;
    d.set_item("detail", &r.detail)?;
    Ok(d.unbind())
}

/// A semispray with expression coefficients, at level 1 or lifted.
#[pyclass(frozen)]
struct Semispray {
    inner: semispray::Semispray,
}

#[pymethods]
impl Semispray {
    /// Level-1 semispray on an n-dimensional base from n coefficient
    /// expressions in x1..xn, y1..yn.
    #[new]
    fn new(n: usize, coeffs: Vec<String>) -> PyResult<Self> {
        let refs: Vec<&str> = coeffs.iter().map(String::as_str).collect();
        Ok(Self {
            inner: semispray::Semispray::from_sources(1, n, &refs).map_err(err)?,
        })
    }

    #[getter]
    fn level(&self) -> u8 {
        self.inner.level()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Coefficient values at a point given by its full coordinate list.
    fn coefficients(&self, coords: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = BundlePoint::new(self.inner.level(), self.inner.n(), coords).map_err(err)?;
        self.inner
            .coeffs()
            .iter()
            .map(|c| c.value(&p).map_err(err))
            .collect()
    }

    fn complete_lift(&self) -> PyResult<Semispray> {
        Ok(Semispray {
            inner: self.inner.complete_lift().map_err(err)?,
        })
    }

    /// Spray check on seeded slashed samples; returns the report as a dict.
    #[pyo3(signature = (count=100, seed=0, tol=1e-9))]
    fn is_spray(&self, py: Python<'_>, count: usize, seed: u64, tol: f64) -> PyResult<Py<PyDict>> {
        let samples = sample_slashed(self.inner.level(), self.inner.n(), count, seed);
        let rep = self.inner.is_spray(&samples, tol).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("bracket_residual", rep.bracket_residual)?;
        d.set_item("coefficient_euler_residual", rep.coefficient_euler_residual)?;
        d.set_item("coefficient_scaling_residual", rep.coefficient_scaling_residual)?;
        d.set_item("pass", rep.pass)?;
        Ok(d.unbind())
    }

    /// Integrates the geodesic flow in phase coordinates; returns
    /// (times, points, status).
    #[pyo3(signature = (x0, v0, t_span=(0.0, 1.0), h=1e-3))]
    fn geodesic(
        &self,
        x0: Vec<f64>,
        v0: Vec<f64>,
        t_span: (f64, f64),
        h: f64,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, String)> {
        let n = self.inner.n();
        let mut init = x0;
        init.extend_from_slice(&v0);
        let p0 = BundlePoint::new(self.inner.level(), n, init).map_err(err)?;
        let cfg = IntegratorConfig::default().with_span(t_span.0, t_span.1).with_h(h);
        let traj =
            dynamics::integrate(&self.inner.as_vector_field(), &p0, &cfg, None).map_err(err)?;
        Ok(trajectory_tuple(traj))
    }

    /// Integrates the Jacobi equation along the geodesic from (x0, v0);
    /// returns (times, points, status) with points as (x, J) pairs.
    #[pyo3(signature = (x0, v0, j0, jdot0, t_span=(0.0, 1.0), h=1e-3))]
    #[allow(clippy::too_many_arguments)]
    fn jacobi(
        &self,
        x0: Vec<f64>,
        v0: Vec<f64>,
        j0: Vec<f64>,
        jdot0: Vec<f64>,
        t_span: (f64, f64),
        h: f64,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, String)> {
        let cfg = IntegratorConfig::default().with_span(t_span.0, t_span.1).with_h(h);
        let traj =
            dynamics::jacobi_direct(&self.inner, &x0, &v0, &j0, &jdot0, &cfg).map_err(err)?;
        Ok(trajectory_tuple(traj))
    }
}

#[pyfunction]
fn version() -> String {
    format!("liftlab {}", env!("CARGO_PKG_VERSION"))
}

#[pyfunction]
fn builtin_names() -> Vec<String> {
    catalog::builtin_names().iter().map(|s| s.to_string()).collect()
}

/// A compiled-in model by name, as its induced level-1 semispray.
#[pyfunction]
fn builtin(name: &str) -> PyResult<Semispray> {
    Ok(Semispray {
        inner: catalog::builtin(name).map_err(err)?.semispray().map_err(err)?,
    })
}

/// The canonical involution on a level-2 or level-3 coordinate list.
#[pyfunction]
fn kappa(level: u8, n: usize, coords: Vec<f64>) -> PyResult<Vec<f64>> {
    let p = BundlePoint::new(level, n, coords).map_err(err)?;
    Ok(chart::kappa(&p).map_err(err)?.into_coords())
}

#[pyfunction]
fn criterion_names() -> Vec<String> {
    suite::criterion_names().iter().map(|s| s.to_string()).collect()
}

/// Runs one self-check criterion by name; None if the name is unknown.
#[pyfunction]
fn run_criterion(py: Python<'_>, name: &str) -> PyResult<Option<Py<PyDict>>> {
    match suite::run_named(name) {
        Some(r) => Ok(Some(criterion_dict(py, &r)?)),
        None => Ok(None),
    }
}

/// Runs the full self-check battery; one dict per criterion.
#[pyfunction]
fn run_suite(py: Python<'_>) -> PyResult<Vec<Py<PyDict>>> {
    suite::run_all().iter().map(|r| criterion_dict(py, r)).collect()
}

#[pymodule]
fn liftlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Semispray>()?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_names, m)?)?;
    m.add_function(wrap_pyfunction!(builtin, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(criterion_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_criterion, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
