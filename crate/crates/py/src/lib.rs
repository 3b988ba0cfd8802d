//! Python bindings: scenarios, the four solvers and the verification suites.
//!
//! Summaries cross the boundary as JSON and are decoded with Python's `json` module, so
//! every result is a plain dict. Trajectories are lists of time slices, each a list of
//! nodal values in the grid's node order.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use hiercontrol::commands::{uncontrolled_context, verify_report, weights_table, Overrides, Suite};
use hiercontrol::discretization::SpaceTimeField;
use hiercontrol::fixedpoint::solve_hierarchic;
use hiercontrol::leader::solve_leader;
use hiercontrol::nash::compute_nash;
use hiercontrol::scenario::{load_scenario, parse_scenario, Scenario};
use hiercontrol::Error;

create_exception!(pyhiercontrol, HierControlError, PyException);
create_exception!(pyhiercontrol, ValidationError, HierControlError);
create_exception!(pyhiercontrol, ConvergenceError, HierControlError);
create_exception!(pyhiercontrol, BudgetError, HierControlError);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.exit_code() {
        2 => ValidationError::new_err(msg),
        3 => ConvergenceError::new_err(msg),
        4 => BudgetError::new_err(msg),
        _ => HierControlError::new_err(msg),
    }
}

fn json_dict<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyDict>> {
    let text = serde_json::to_string(value).map_err(|e| HierControlError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.cast_into::<PyDict>()?)
}

fn slices(f: &SpaceTimeField) -> Vec<Vec<f64>> {
    (0..f.time().slices()).map(|m| f.slice(m).to_vec()).collect()
}

/// A validated scenario.
#[pyclass(name = "Scenario", module = "pyhiercontrol", skip_from_py_object)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: load_scenario(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: parse_scenario(text).map_err(to_py)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(to_py)
    }

    /// Copy with solver and weight parameters replaced; the result is revalidated.
    #[pyo3(signature = (*, epsilon=None, lambda_=None, mu=None, cg_tol=None, cg_max=None, outer_tol=None,
                        max_outer=None, nash_tol=None, nash_damping=None, nash_max_iter=None, seed=None))]
    #[allow(clippy::too_many_arguments)]
    fn with_overrides(
        &self,
        epsilon: Option<f64>,
        lambda_: Option<f64>,
        mu: Option<f64>,
        cg_tol: Option<f64>,
        cg_max: Option<usize>,
        outer_tol: Option<f64>,
        max_outer: Option<usize>,
        nash_tol: Option<f64>,
        nash_damping: Option<f64>,
        nash_max_iter: Option<usize>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        Overrides {
            epsilon,
            lambda: lambda_,
            mu,
            cg_tol,
            cg_max,
            outer_tol,
            max_outer,
            nash_tol,
            nash_damping,
            nash_max_iter,
            seed,
        }
        .apply(&mut inner)
        .map_err(to_py)?;
        Ok(PyScenario { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.grid.dim
    }

    #[getter]
    fn cells(&self) -> usize {
        self.inner.grid.cells
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.grid.steps
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.grid.t_final
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Node coordinates `[x, y]` (y is 0 in 1D).
    fn coords(&self) -> PyResult<Vec<[f64; 2]>> {
        Ok(self.inner.grids().map_err(to_py)?.0.coords())
    }

    fn times(&self) -> PyResult<Vec<f64>> {
        let time = self.inner.grids().map_err(to_py)?.1;
        Ok((0..time.slices()).map(|m| time.t(m)).collect())
    }

    fn __repr__(&self) -> String {
        let g = &self.inner.grid;
        format!("Scenario(dim={}, cells={}, steps={}, T={})", g.dim, g.cells, g.steps, g.t_final)
    }
}

/// Full hierarchic solve. Raises ConvergenceError if the outer iteration does not converge.
#[pyfunction]
fn solve<'py>(py: Python<'py>, scenario: &PyScenario) -> PyResult<Bound<'py, PyDict>> {
    let sc = scenario.inner.clone();
    let report = py
        .detach(move || -> hiercontrol::Result<_> {
            let prob = sc.build()?;
            solve_hierarchic(&prob, &sc.fixed_point_options()?)
        })
        .map_err(to_py)?;
    if !report.converged {
        return Err(ConvergenceError::new_err(format!(
            "outer fixed point did not converge after {} iterations",
            report.iterations
        )));
    }
    let d = json_dict(py, &report.summary())?;
    d.set_item("u", slices(&report.u))?;
    d.set_item("y", slices(&report.nash.y))?;
    d.set_item("v1", slices(&report.nash.v[0]))?;
    d.set_item("v2", slices(&report.nash.v[1]))?;
    d.set_item("y_linearized", slices(&report.linearized_y))?;
    Ok(d)
}

/// Follower equilibrium for the scenario's leader control.
#[pyfunction]
fn nash<'py>(py: Python<'py>, scenario: &PyScenario) -> PyResult<Bound<'py, PyDict>> {
    let sc = scenario.inner.clone();
    let sol = py
        .detach(move || -> hiercontrol::Result<_> {
            let prob = sc.build()?;
            compute_nash(&prob, &sc.leader_control()?, &sc.nash_options())
        })
        .map_err(to_py)?;
    let d = json_dict(py, &sol.summary())?;
    d.set_item("y", slices(&sol.y))?;
    d.set_item("v1", slices(&sol.v[0]))?;
    d.set_item("v2", slices(&sol.v[1]))?;
    Ok(d)
}

/// Leader control of the problem linearized at the uncontrolled state.
#[pyfunction]
fn leader<'py>(py: Python<'py>, scenario: &PyScenario) -> PyResult<Bound<'py, PyDict>> {
    let sc = scenario.inner.clone();
    let sol = py
        .detach(move || -> hiercontrol::Result<_> {
            let prob = sc.build()?;
            let ctx = uncontrolled_context(&sc, &prob)?;
            solve_leader(&ctx, &prob.y0, true, &sc.leader_options())
        })
        .map_err(to_py)?;
    let d = json_dict(py, &sol.summary())?;
    d.set_item("u", slices(&sol.u))?;
    d.set_item("y", slices(&sol.y))?;
    d.set_item("phi_t", sol.phi_t.values().to_vec())?;
    Ok(d)
}

/// Weight table on the interior time slices: `(header, rows)`.
#[pyfunction]
fn weights(scenario: &PyScenario) -> PyResult<(Vec<String>, Vec<Vec<f64>>)> {
    let (header, rows) = weights_table(&scenario.inner).map_err(to_py)?;
    Ok((header.into_iter().map(String::from).collect(), rows))
}

/// Runs a verification suite and returns its report; failed budgets are reported, not raised.
#[pyfunction]
#[pyo3(signature = (scenario, suite="all", samples=None))]
fn verify<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    suite: &str,
    samples: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let suite: Suite = suite.parse().map_err(to_py)?;
    let sc = scenario.inner.clone();
    let report = py.detach(move || verify_report(&sc, suite, samples)).map_err(to_py)?;
    json_dict(py, &report)
}

#[pymodule]
fn pyhiercontrol(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(nash, m)?)?;
    m.add_function(wrap_pyfunction!(leader, m)?)?;
    m.add_function(wrap_pyfunction!(weights, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    let py = m.py();
    m.add("HierControlError", py.get_type::<HierControlError>())?;
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("ConvergenceError", py.get_type::<ConvergenceError>())?;
    m.add("BudgetError", py.get_type::<BudgetError>())?;
    Ok(())
}
