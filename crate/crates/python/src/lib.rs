//! Python bindings: cases, discretizations, monolithic and Robin-Robin solves,
//! error sweeps and the invariant suite.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stokes_darcy::case::{CaseId, ManufacturedCase};
use stokes_darcy::error::Error;
use stokes_darcy::harness::{self, SolveMode, VARIABLES};
use stokes_darcy::solve::{self, DdmOptions};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::Unsupported(_) | Error::Construction(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn error_map(e: harness::ErrorRecord) -> HashMap<String, f64> {
    VARIABLES.iter().zip(e.as_array()).map(|(k, v)| (k.to_string(), v)).collect()
}

fn ddm_options(dp: f64, df: f64, tol: f64, max_iter: usize) -> PyResult<DdmOptions> {
    let mut o = DdmOptions::new(dp, df).map_err(to_py)?;
    o.tol = tol;
    o.max_iter = max_iter;
    Ok(o)
}

/// One of the shipped examples (1..=4).
#[pyclass(name = "Case", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCase {
    inner: ManufacturedCase,
}

#[pymethods]
impl PyCase {
    #[new]
    #[pyo3(signature = (id, mu = 1.0))]
    fn new(id: u32, mu: f64) -> PyResult<Self> {
        Ok(PyCase { inner: ManufacturedCase::new(CaseId::from_number(id, mu).map_err(to_py)?) })
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn slip(&self) -> f64 {
        self.inner.slip
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn has_exact(&self) -> bool {
        self.inner.has_exact()
    }

    /// (xmin, xmax, ymin, ymax) of the fluid region.
    #[getter]
    fn stokes_region(&self) -> (f64, f64, f64, f64) {
        let r = self.inner.stokes;
        (r.xmin, r.xmax, r.ymin, r.ymax)
    }

    #[getter]
    fn darcy_region(&self) -> (f64, f64, f64, f64) {
        let r = self.inner.darcy;
        (r.xmin, r.xmax, r.ymin, r.ymax)
    }

    fn fluid_velocity(&self, x: f64, y: f64) -> (f64, f64) {
        let u = self.inner.u_s([x, y]);
        (u[0], u[1])
    }

    fn porous_pressure(&self, x: f64, y: f64) -> f64 {
        self.inner.p_d([x, y])
    }

    fn __repr__(&self) -> String {
        format!("Case({:?})", self.inner.id)
    }
}

/// Coefficient vectors of a discrete solution.
#[pyclass(name = "Solution", frozen)]
struct PySolution {
    inner: solve::Solution,
    #[pyo3(get)]
    iterations: Option<usize>,
    #[pyo3(get)]
    history: Vec<(f64, f64)>,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn stress(&self) -> Vec<f64> {
        self.inner.sigma.values.clone()
    }

    #[getter]
    fn fluid_velocity(&self) -> Vec<f64> {
        self.inner.us.values.clone()
    }

    #[getter]
    fn porous_velocity(&self) -> Vec<f64> {
        self.inner.ud.values.clone()
    }

    #[getter]
    fn porous_pressure(&self) -> Vec<f64> {
        self.inner.pd.values.clone()
    }
}

/// Mesh, spaces and assembled blocks of one problem.
#[pyclass(name = "Discretization", frozen)]
struct PyDiscretization {
    inner: solve::Discretization,
}

#[pymethods]
impl PyDiscretization {
    #[new]
    #[pyo3(signature = (case, n, k = 1))]
    fn new(py: Python<'_>, case: &PyCase, n: usize, k: usize) -> PyResult<Self> {
        let c = case.inner;
        let inner = py.detach(|| solve::Discretization::new(c, n, k)).map_err(to_py)?;
        Ok(PyDiscretization { inner })
    }

    #[getter]
    fn n_unknowns(&self) -> usize {
        self.inner.spaces.n_unknowns()
    }

    #[getter]
    fn n_triangles(&self) -> usize {
        self.inner.mesh.triangles.len()
    }

    /// Monolithic solve.
    fn solve(&self, py: Python<'_>) -> PyResult<PySolution> {
        let s = py.detach(|| solve::solve_monolithic(&self.inner)).map_err(to_py)?;
        Ok(PySolution { inner: s, iterations: None, history: Vec::new() })
    }

    /// Robin-Robin iteration.
    #[pyo3(signature = (dp, df, tol = 1e-6, max_iter = 100_000))]
    fn ddm(&self, py: Python<'_>, dp: f64, df: f64, tol: f64, max_iter: usize) -> PyResult<PySolution> {
        let o = ddm_options(dp, df, tol, max_iter)?;
        let r = py.detach(|| solve::run_ddm(&self.inner, &o)).map_err(to_py)?;
        Ok(PySolution { inner: r.solution, iterations: Some(r.iterations), history: r.history })
    }

    /// L2 errors against the exact solution, keyed by variable.
    fn errors(&self, solution: &PySolution) -> PyResult<HashMap<String, f64>> {
        let rule = harness::error_rule(self.inner.k());
        harness::l2_errors(&solution.inner, &self.inner, &rule).map(error_map).map_err(to_py)
    }

    /// Max interface mismatch of the normal velocities.
    fn continuity_residual(&self, solution: &PySolution) -> f64 {
        harness::interface_continuity_residual(&solution.inner, &self.inner)
    }
}

/// Errors, orders and iteration counts over mesh levels; Robin-Robin when
/// both `dp` and `df` are given.
#[pyfunction]
#[pyo3(signature = (case, k, ns, dp = None, df = None, tol = 1e-6, max_iter = 100_000))]
fn convergence_study(
    py: Python<'_>,
    case: &PyCase,
    k: usize,
    ns: Vec<usize>,
    dp: Option<f64>,
    df: Option<f64>,
    tol: f64,
    max_iter: usize,
) -> PyResult<Vec<HashMap<String, Option<f64>>>> {
    let mode = match (dp, df) {
        (Some(dp), Some(df)) => SolveMode::Ddm(ddm_options(dp, df, tol, max_iter)?),
        (None, None) => SolveMode::Monolithic,
        _ => return Err(PyValueError::new_err("dp and df must be given together")),
    };
    let c = case.inner;
    let rows = py.detach(|| harness::convergence_study(c, k, &ns, mode)).map_err(to_py)?;
    let mut out = Vec::new();
    for r in rows {
        if let Some(f) = r.failure {
            return Err(PyRuntimeError::new_err(format!("level n={}: {f}", r.n)));
        }
        let mut m: HashMap<String, Option<f64>> = HashMap::new();
        m.insert("n".into(), Some(r.n as f64));
        m.insert("dofs".into(), Some(r.dofs as f64));
        m.insert("iterations".into(), r.iterations.map(|i| i as f64));
        for (j, var) in VARIABLES.iter().enumerate() {
            m.insert(format!("error_{var}"), r.errors.map(|e| e.as_array()[j]));
            m.insert(format!("order_{var}"), r.orders.map(|o| o[j]));
        }
        out.push(m);
    }
    Ok(out)
}

/// Invariant suite: list of (name, value, tolerance, pass).
#[pyfunction]
#[pyo3(signature = (case, n = 2, k = 1))]
fn check_invariants(py: Python<'_>, case: &PyCase, n: usize, k: usize) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let c = case.inner;
    let r = py.detach(|| harness::check_invariants(c, n, k)).map_err(to_py)?;
    Ok(r.into_iter().map(|c| (c.name.to_string(), c.value, c.tolerance, c.pass)).collect())
}

#[pymodule]
fn stokes_darcy_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCase>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyDiscretization>()?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(check_invariants, m)?)?;
    m.add("VARIABLES", VARIABLES.to_vec())?;
    Ok(())
}
