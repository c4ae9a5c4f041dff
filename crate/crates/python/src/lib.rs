//! Python bindings: canonical units, the element transforms, the
//! Henze-Zirkler test, and the scenario pipelines.
//!
//! Build `libmgeqoe.so` with `cargo build -p mgeqoe-py --release` and import
//! it as `mgeqoe` (see `python/smoke_test.py` for a loader).

use nalgebra::Vector3;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mgeqoe_core::bodies::BodyConstants;
use mgeqoe_core::elements;
use mgeqoe_core::error::Error;
use mgeqoe_core::pipeline;
use mgeqoe_core::scenario::Scenario;
use mgeqoe_core::state::{CartesianState, Epoch};
use mgeqoe_core::uncertainty;

fn to_py_err(err: Error) -> PyErr {
    if err.is_config() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

/// Characteristic quantities of the canonical unit system.
#[pyclass(name = "CanonicalUnits", from_py_object)]
#[derive(Clone)]
struct PyCanonicalUnits {
    inner: mgeqoe_core::CanonicalUnits,
}

#[pymethods]
impl PyCanonicalUnits {
    /// Build from a characteristic length and the two primary gravitational
    /// parameters (km, km^3/s^2).
    #[new]
    fn new(l_star_km: f64, mu_earth: f64, mu_moon: f64) -> PyResult<Self> {
        Ok(PyCanonicalUnits {
            inner: mgeqoe_core::CanonicalUnits::new(l_star_km, mu_earth, mu_moon)
                .map_err(to_py_err)?,
        })
    }

    /// The default Earth-Moon system.
    #[staticmethod]
    fn earth_moon() -> PyResult<Self> {
        Ok(PyCanonicalUnits {
            inner: mgeqoe_core::CanonicalUnits::from_constants(&BodyConstants::default())
                .map_err(to_py_err)?,
        })
    }

    #[getter]
    fn l_star(&self) -> f64 {
        self.inner.l_star
    }

    #[getter]
    fn gm_sum(&self) -> f64 {
        self.inner.gm_sum
    }

    #[getter]
    fn t_star(&self) -> f64 {
        self.inner.t_star
    }

    #[getter]
    fn v_star(&self) -> f64 {
        self.inner.v_star
    }

    fn km_to_canonical(&self, km: f64) -> f64 {
        self.inner.km_to_canonical(km)
    }

    fn days_to_canonical(&self, days: f64) -> f64 {
        self.inner.days_to_canonical(days)
    }

    fn __repr__(&self) -> String {
        format!(
            "CanonicalUnits(l_star={}, t_star={}, v_star={})",
            self.inner.l_star, self.inner.t_star, self.inner.v_star
        )
    }
}

/// The six-element state {p_tilde, p1, p2, q1, q2, L}.
#[pyclass(name = "MGeqoeElements", from_py_object)]
#[derive(Clone)]
struct PyMGeqoeElements {
    inner: elements::MGeqoeState,
}

#[pymethods]
impl PyMGeqoeElements {
    #[new]
    fn new(p_tilde: f64, p1: f64, p2: f64, q1: f64, q2: f64, true_longitude: f64) -> Self {
        PyMGeqoeElements {
            inner: elements::MGeqoeState {
                p_tilde,
                p1,
                p2,
                q1,
                q2,
                true_longitude,
            },
        }
    }

    #[getter]
    fn p_tilde(&self) -> f64 {
        self.inner.p_tilde
    }

    #[getter]
    fn p1(&self) -> f64 {
        self.inner.p1
    }

    #[getter]
    fn p2(&self) -> f64 {
        self.inner.p2
    }

    #[getter]
    fn q1(&self) -> f64 {
        self.inner.q1
    }

    #[getter]
    fn q2(&self) -> f64 {
        self.inner.q2
    }

    #[getter]
    fn true_longitude(&self) -> f64 {
        self.inner.true_longitude
    }

    fn to_list(&self) -> [f64; 6] {
        [
            self.inner.p_tilde,
            self.inner.p1,
            self.inner.p2,
            self.inner.q1,
            self.inner.q2,
            self.inner.true_longitude,
        ]
    }

    fn __repr__(&self) -> String {
        format!(
            "MGeqoeElements(p_tilde={}, p1={}, p2={}, q1={}, q2={}, true_longitude={})",
            self.inner.p_tilde,
            self.inner.p1,
            self.inner.p2,
            self.inner.q1,
            self.inner.q2,
            self.inner.true_longitude
        )
    }
}

/// Transform a canonical Cartesian state into the element set. `u` is the
/// perturbing potential at the state, `mu` the central gravitational
/// parameter (canonical).
#[pyfunction]
#[pyo3(signature = (position, velocity, u=0.0, mu=1.0, epoch=0.0))]
fn cart_to_elements(
    position: [f64; 3],
    velocity: [f64; 3],
    u: f64,
    mu: f64,
    epoch: f64,
) -> PyResult<PyMGeqoeElements> {
    let state = CartesianState::new(Vector3::from(position), Vector3::from(velocity));
    let inner = elements::cart_to_mgeqoe(&state, u, mu, Epoch(epoch)).map_err(to_py_err)?;
    Ok(PyMGeqoeElements { inner })
}

/// Inverse transform with a constant potential `u`.
#[pyfunction]
#[pyo3(signature = (elements, u=0.0, mu=1.0, epoch=0.0))]
fn elements_to_cart(
    elements: &PyMGeqoeElements,
    u: f64,
    mu: f64,
    epoch: f64,
) -> PyResult<([f64; 3], [f64; 3])> {
    let state = elements::mgeqoe_to_cart(&elements.inner, mu, |_, _| Ok(u), Epoch(epoch))
        .map_err(to_py_err)?;
    Ok((state.r.into(), state.v.into()))
}

/// Henze-Zirkler multivariate normality test over row-major samples.
/// Returns (hz, p_value, reject, beta).
#[pyfunction]
#[pyo3(signature = (samples, alpha=0.05))]
fn hz_test(samples: Vec<Vec<f64>>, alpha: f64) -> PyResult<(f64, f64, bool, f64)> {
    if samples.len() < 2 {
        return Err(PyValueError::new_err("need at least 2 samples"));
    }
    let n_dim = samples[0].len();
    if n_dim == 0 || samples.iter().any(|row| row.len() != n_dim) {
        return Err(PyValueError::new_err("samples must be rectangular"));
    }
    let flat: Vec<f64> = samples.iter().flatten().copied().collect();
    let (hz, beta) =
        uncertainty::hz_statistic_dyn(&flat, samples.len(), n_dim).map_err(to_py_err)?;
    let (log_mean, log_sd) = uncertainty::hz_null_lognormal(n_dim, beta).map_err(to_py_err)?;
    let p_value = uncertainty::hz_pvalue(hz, log_mean, log_sd).map_err(to_py_err)?;
    Ok((hz, p_value, p_value <= alpha, beta))
}

/// Run the propagate pipeline for a scenario file, writing CSV products
/// into `out_dir`. Returns the constant potential offset used.
#[pyfunction]
fn propagate_scenario(scenario_path: &str, out_dir: &str) -> PyResult<f64> {
    let scenario = Scenario::load(std::path::Path::new(scenario_path)).map_err(to_py_err)?;
    let products = pipeline::run_propagation(&scenario).map_err(to_py_err)?;
    pipeline::write_propagation_products(&scenario, &products, std::path::Path::new(out_dir))
        .map_err(to_py_err)?;
    Ok(products.u_offset)
}

/// Run the Monte Carlo pipeline for a scenario file (needs an [ensemble]
/// block), writing HZ series and pairs-plot CSVs into `out_dir`. Returns
/// per-kind (epoch, p_value) series as a dict.
#[pyfunction]
#[pyo3(signature = (scenario_path, out_dir, alpha=0.05, epochs_days=None, hz_subsample=None))]
fn monte_carlo_scenario(
    py: Python<'_>,
    scenario_path: &str,
    out_dir: &str,
    alpha: f64,
    epochs_days: Option<Vec<f64>>,
    hz_subsample: Option<usize>,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let scenario = Scenario::load(std::path::Path::new(scenario_path)).map_err(to_py_err)?;
    let options = pipeline::MonteCarloOptions {
        alpha,
        snapshot_epochs_days: epochs_days,
        hz_subsample,
    };
    let products = pipeline::run_monte_carlo(&scenario, &options).map_err(to_py_err)?;
    pipeline::write_monte_carlo_products(&scenario, &products, std::path::Path::new(out_dir))
        .map_err(to_py_err)?;

    let summary = pyo3::types::PyDict::new(py);
    for results in [&products.cartesian, &products.mgeqoe].into_iter().flatten() {
        let series: Vec<(f64, f64)> = results
            .hz
            .epochs
            .iter()
            .zip(&results.hz.results)
            .map(|(&t, r)| (t, r.p_value))
            .collect();
        summary.set_item(results.ensemble.kind.name(), series)?;
    }
    summary.set_item("u_offset", products.u_offset)?;
    summary.set_item("snapshot_indices", products.snapshot_indices.clone())?;
    Ok(summary.unbind())
}

/// Default DE440-consistent constant set as a dict.
#[pyfunction]
fn default_constants(py: Python<'_>) -> PyResult<Py<pyo3::types::PyDict>> {
    let constants = BodyConstants::default();
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("mu_earth_km3s2", constants.mu_earth)?;
    dict.set_item("mu_moon_km3s2", constants.mu_moon)?;
    dict.set_item("mu_sun_km3s2", constants.mu_sun)?;
    dict.set_item("l_star_km", constants.l_star)?;
    Ok(dict.unbind())
}

#[pymodule]
fn mgeqoe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCanonicalUnits>()?;
    m.add_class::<PyMGeqoeElements>()?;
    m.add_function(wrap_pyfunction!(cart_to_elements, m)?)?;
    m.add_function(wrap_pyfunction!(elements_to_cart, m)?)?;
    m.add_function(wrap_pyfunction!(hz_test, m)?)?;
    m.add_function(wrap_pyfunction!(propagate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(default_constants, m)?)?;
    Ok(())
}
