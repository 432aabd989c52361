//! Python bindings: systems, solvers, Monte Carlo evaluation and risk measures.

use std::sync::Arc;

use pyo3::exceptions::{PyArithmeticError, PyMemoryError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use riskctl::dp::{self, CvarInnerSolution, EuSolution, EuVariant, ThetaStatus};
use riskctl::grid::State;
use riskctl::monte_carlo;
use riskctl::risk::{self, FiniteDistribution};
use riskctl::systems::{self, StormwaterConfig, StormwaterParams};
use riskctl::{Error, SystemModel};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NumericalInstability { .. } => PyArithmeticError::new_err(e.to_string()),
        Error::MemoryBudget { .. } => PyMemoryError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn distribution(values: Vec<f64>, probabilities: Option<Vec<f64>>) -> PyResult<FiniteDistribution> {
    match probabilities {
        Some(p) => FiniteDistribution::from_parts(&values, &p),
        None => FiniteDistribution::equiprobable(&values),
    }
    .map_err(py_err)
}

fn variant(name: &str) -> PyResult<EuVariant> {
    name.parse().map_err(py_err)
}

/// A benchmark system on its state grid.
#[pyclass(frozen, name = "System")]
struct PySystem(Arc<SystemModel>);

#[pymethods]
impl PySystem {
    /// Thermostat with its default disturbance table.
    #[staticmethod]
    fn thermostat() -> PyResult<Self> {
        Ok(Self(Arc::new(systems::make_thermostat().map_err(py_err)?)))
    }

    /// Two-tank stormwater system; `grid_step` must divide the tank ranges.
    #[staticmethod]
    #[pyo3(signature = (grid_step = 0.1, horizon = 48))]
    fn stormwater(grid_step: f64, horizon: usize) -> PyResult<Self> {
        let config = StormwaterConfig { grid_step, horizon };
        let model = systems::make_stormwater_with(&config, StormwaterParams::default(), systems::stormwater_disturbance())
            .map_err(py_err)?;
        Ok(Self(Arc::new(model)))
    }

    #[staticmethod]
    fn toy_three_state() -> Self {
        Self(Arc::new(systems::toy::three_state()))
    }

    #[staticmethod]
    fn toy_two_state() -> Self {
        Self(Arc::new(systems::toy::two_state()))
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.0.horizon()
    }

    #[getter]
    fn controls(&self) -> Vec<f64> {
        self.0.controls().to_vec()
    }

    /// State grid axes, one list per coordinate.
    #[getter]
    fn axes(&self) -> Vec<Vec<f64>> {
        self.0.grid().axes().to_vec()
    }

    /// Grid nodes in table order.
    fn nodes(&self) -> Vec<Vec<f64>> {
        self.0.grid().nodes().map(|x| x.as_slice().to_vec()).collect()
    }

    /// `(b̲, ā)`: lower bound of the total cost and the width of its range.
    fn derived_bounds(&self) -> (f64, f64) {
        self.0.derived_bounds()
    }

    /// Disturbance support and probabilities.
    fn disturbance(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.0.disturbance();
        (d.support().to_vec(), d.probabilities().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("System({:?}, nodes={}, horizon={})", self.0.name(), self.0.grid().len(), self.0.horizon())
    }
}

#[pyclass(frozen, name = "EuSolution")]
struct PyEuSolution {
    system: Arc<SystemModel>,
    inner: EuSolution,
}

#[pymethods]
impl PyEuSolution {
    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }

    /// Optimal exponential utility at every grid node.
    fn values(&self) -> Vec<f64> {
        self.inner.optimal_values().into_values()
    }

    fn value_at(&self, x: Vec<f64>) -> f64 {
        self.inner.value_at(&State::new(&x))
    }

    /// Costs of `n` closed-loop trajectories from `x0`.
    #[pyo3(signature = (x0, n, seed = 0))]
    fn simulate(&self, py: Python<'_>, x0: Vec<f64>, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        let set = py
            .detach(|| monte_carlo::simulate_eu(&self.system, &self.inner, &State::new(&x0), n, seed))
            .map_err(py_err)?;
        Ok(set.samples().to_vec())
    }
}

#[pyclass(frozen, name = "CvarSolution")]
struct PyCvarSolution {
    system: Arc<SystemModel>,
    inner: CvarInnerSolution,
}

#[pymethods]
impl PyCvarSolution {
    #[getter]
    fn s_axis(&self) -> Vec<f64> {
        self.inner.s_axis().to_vec()
    }

    /// `(values, budgets)`: optimal CVaR and minimizing budget at every node.
    fn optimal(&self, alpha: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let out = dp::outer_minimize(&self.inner, alpha).map_err(py_err)?;
        Ok((out.values.into_values(), out.budgets))
    }

    /// `(J*, s*)` at an arbitrary state.
    fn optimal_at(&self, alpha: f64, x: Vec<f64>) -> PyResult<(f64, f64)> {
        self.inner.optimal_at(alpha, &State::new(&x)).map_err(py_err)
    }

    /// `J_t(x, s)` of the inner problem.
    fn inner_value(&self, t: usize, x: Vec<f64>, s: f64) -> f64 {
        self.inner.inner_value(t, &State::new(&x), s)
    }

    #[pyo3(signature = (alpha, x0, n, seed = 0))]
    fn simulate(&self, py: Python<'_>, alpha: f64, x0: Vec<f64>, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        let set = py
            .detach(|| monte_carlo::simulate_cvar(&self.system, &self.inner, alpha, &State::new(&x0), n, seed))
            .map_err(py_err)?;
        Ok(set.samples().to_vec())
    }
}

#[pyfunction]
#[pyo3(signature = (system, theta, variant = "raw"))]
fn solve_eu(py: Python<'_>, system: &PySystem, theta: f64, variant: &str) -> PyResult<PyEuSolution> {
    let v = self::variant(variant)?;
    let model = Arc::clone(&system.0);
    let inner = py.detach(|| dp::solve_eu(&model, theta, v)).map_err(py_err)?;
    Ok(PyEuSolution { system: model, inner })
}

#[pyfunction]
#[pyo3(signature = (system, s_res = 65, mem_budget = dp::DEFAULT_MEMORY_BUDGET))]
fn solve_cvar(py: Python<'_>, system: &PySystem, s_res: usize, mem_budget: u64) -> PyResult<PyCvarSolution> {
    let model = Arc::clone(&system.0);
    let inner = py
        .detach(|| dp::solve_cvar_inner_with_budget(&model, s_res, mem_budget))
        .map_err(py_err)?;
    Ok(PyCvarSolution { system: model, inner })
}

/// Optimal expected total cost at every node.
#[pyfunction]
fn solve_risk_neutral(py: Python<'_>, system: &PySystem) -> PyResult<Vec<f64>> {
    let sol = py.detach(|| dp::solve_risk_neutral(&system.0)).map_err(py_err)?;
    Ok(sol.optimal_values().into_values())
}

/// `[(theta, raw_stable, nonnegative_stable)]`
#[pyfunction]
fn stable_theta_probe(system: &PySystem, thetas: Vec<f64>) -> PyResult<Vec<(f64, bool, bool)>> {
    let probe = dp::stable_theta_probe(&system.0, &thetas).map_err(py_err)?;
    Ok(probe
        .into_iter()
        .map(|(t, raw, nn): (f64, ThetaStatus, ThetaStatus)| (t, raw.is_stable(), nn.is_stable()))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (values, theta, probabilities = None, lower_bound = None))]
fn exponential_utility(
    values: Vec<f64>,
    theta: f64,
    probabilities: Option<Vec<f64>>,
    lower_bound: Option<f64>,
) -> PyResult<f64> {
    let d = distribution(values, probabilities)?;
    let b = lower_bound.unwrap_or_else(|| d.min_value());
    risk::exponential_utility(&d, theta, b).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (values, alpha, probabilities = None))]
fn cvar_exact(values: Vec<f64>, alpha: f64, probabilities: Option<Vec<f64>>) -> PyResult<f64> {
    risk::cvar_exact(&distribution(values, probabilities)?, alpha).map_err(py_err)
}

#[pyfunction]
fn var_estimate(samples: Vec<f64>, alpha: f64) -> PyResult<f64> {
    risk::var_estimate(&samples, alpha).map_err(py_err)
}

#[pyfunction]
fn cvar_estimate(samples: Vec<f64>, alpha: f64) -> PyResult<f64> {
    risk::cvar_estimate(&samples, alpha).map_err(py_err)
}

/// Mean, variance and per-α VaR, CVaR and expected exceedance.
#[pyfunction]
fn empirical_stats<'py>(py: Python<'py>, samples: Vec<f64>, alphas: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let stats = risk::empirical_stats(&samples, &alphas).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("n", stats.n)?;
    out.set_item("mean", stats.mean)?;
    out.set_item("variance", stats.variance)?;
    let tails = PyDict::new(py);
    for t in &stats.tails {
        let d = PyDict::new(py);
        d.set_item("var", t.var)?;
        d.set_item("cvar", t.cvar)?;
        d.set_item("exceedance", t.exceedance)?;
        tails.set_item(t.alpha, d)?;
    }
    out.set_item("tails", tails)?;
    Ok(out)
}

/// Rows `(u, mean, variance, [ce_γ…], [cvar_α…])` of the quadratic example.
#[pyfunction]
fn pedagogical_curves(u: Vec<f64>, gammas: Vec<f64>, alphas: Vec<f64>) -> PyResult<Vec<(f64, f64, f64, Vec<f64>, Vec<f64>)>> {
    let rows = systems::pedagogical_curves(&u, &gammas, &alphas).map_err(py_err)?;
    Ok(rows.into_iter().map(|r| (r.u, r.mean, r.variance, r.ce, r.cvar)).collect())
}

#[pymodule]
#[pyo3(name = "riskctl")]
fn riskctl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyEuSolution>()?;
    m.add_class::<PyCvarSolution>()?;
    m.add_function(wrap_pyfunction!(solve_eu, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cvar, m)?)?;
    m.add_function(wrap_pyfunction!(solve_risk_neutral, m)?)?;
    m.add_function(wrap_pyfunction!(stable_theta_probe, m)?)?;
    m.add_function(wrap_pyfunction!(exponential_utility, m)?)?;
    m.add_function(wrap_pyfunction!(cvar_exact, m)?)?;
    m.add_function(wrap_pyfunction!(var_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(cvar_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_stats, m)?)?;
    m.add_function(wrap_pyfunction!(pedagogical_curves, m)?)?;
    Ok(())
}
