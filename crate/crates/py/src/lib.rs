//! Python bindings: scenarios, classification, set assembly and membership,
//! simulation, Monte Carlo sweeps and the membership oracle.
//!
//! Structured results come back as plain Python dicts and lists. Input
//! errors raise `ValueError`, compute failures `RuntimeError`; both messages
//! start with the error code.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use epibarrier::analysis;
use epibarrier::barrier::{self, ComputedSet};
use epibarrier::export::{self, SetDocument, FORMAT_VERSION};
use epibarrier::policy::{self, OracleOptions, Policy, SwitchingSets};
use epibarrier::scenario::validate_config;
use epibarrier::{Error, ModelVariant, SetKind, StateVec, Tolerances};

fn py_err(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Serialises through JSON into native Python objects.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| py_err(e.into()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn set_kind(name: &str) -> PyResult<SetKind> {
    match name.to_ascii_lowercase().as_str() {
        "admissible" => Ok(SetKind::Admissible),
        "mrpi" => Ok(SetKind::Mrpi),
        _ => Err(PyValueError::new_err(format!("set kind must be 'admissible' or 'mrpi', got {name:?}"))),
    }
}

fn tolerances(overrides: Option<HashMap<String, f64>>) -> PyResult<Tolerances> {
    let mut tol = Tolerances::default();
    let mut pairs: Vec<_> = overrides.unwrap_or_default().into_iter().collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    for (k, v) in pairs {
        tol = tol.with_override(&k, v).map_err(py_err)?;
    }
    Ok(tol)
}

/// States are `[S, I]` for SIR and `[S, I, E]` for SEIR, as on the command line.
fn state(sc: &epibarrier::Scenario, x: Vec<f64>) -> PyResult<StateVec> {
    let p = match (sc.variant.is_seir(), x.as_slice()) {
        (false, &[s, i]) => StateVec::sir(s, i),
        (true, &[s, i, e]) => StateVec::seir(s, e, i),
        _ => return Err(py_err(Error::BadState(format!("expected {} components, got {}", sc.dim(), x.len())))),
    };
    if !p.in_simplex(0.0) {
        return Err(py_err(Error::BadState(format!("{x:?} is not in the simplex"))));
    }
    Ok(p)
}

#[pyclass(name = "Scenario", module = "epibarrier", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: epibarrier::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn sir_perfect(gamma: f64, beta: (f64, f64), i_max: f64) -> PyResult<Self> {
        wrap(epibarrier::Scenario::sir_perfect(gamma, beta, i_max))
    }

    #[staticmethod]
    fn seir_perfect(beta: (f64, f64), gamma: (f64, f64), eta: f64, i_max: f64) -> PyResult<Self> {
        wrap(epibarrier::Scenario::seir_perfect(beta, gamma, eta, i_max))
    }

    #[staticmethod]
    fn sir_imperfect(beta: (f64, f64), gamma: (f64, f64), i_max: f64) -> PyResult<Self> {
        wrap(epibarrier::Scenario::sir_imperfect(beta, gamma, i_max))
    }

    #[staticmethod]
    fn seir_imperfect(beta: (f64, f64), gamma: (f64, f64), eta: (f64, f64), i_max: f64) -> PyResult<Self> {
        wrap(epibarrier::Scenario::seir_imperfect(beta, gamma, eta, i_max))
    }

    /// Parses a config document (the same JSON the CLI reads).
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| py_err(e.into()))?;
        let (inner, _) = validate_config(&raw).map_err(py_err)?;
        Ok(PyScenario { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_raw().to_string()
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.inner.variant.as_str()
    }

    #[getter]
    fn i_max(&self) -> f64 {
        self.inner.i_max
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("Scenario({})", self.to_json())
    }
}

fn wrap(r: epibarrier::Result<epibarrier::Scenario>) -> PyResult<PyScenario> {
    r.map(|inner| PyScenario { inner }).map_err(py_err)
}

#[pyclass(name = "ComputedSet", module = "epibarrier", frozen)]
struct PyComputedSet {
    inner: ComputedSet,
}

#[pymethods]
impl PyComputedSet {
    #[getter]
    fn set_kind(&self) -> &'static str {
        self.inner.set_kind.as_str()
    }

    #[getter]
    fn trivial(&self) -> bool {
        self.inner.trivial
    }

    #[getter]
    fn n_curves(&self) -> usize {
        self.inner.curve_summaries.len()
    }

    #[getter]
    fn scenario(&self) -> PyScenario {
        PyScenario {
            inner: self.inner.scenario.clone(),
        }
    }

    /// Verdict, distance estimate and nearest boundary part for one state.
    fn membership(&self, py: Python<'_>, x: Vec<f64>) -> PyResult<Py<PyAny>> {
        let p = state(&self.inner.scenario, x)?;
        to_py(py, &self.inner.membership(&p))
    }

    /// Verdict strings for many states.
    fn verdicts(&self, xs: Vec<Vec<f64>>) -> PyResult<Vec<&'static str>> {
        xs.into_iter()
            .map(|x| Ok(self.inner.membership(&state(&self.inner.scenario, x)?).verdict.as_str()))
            .collect()
    }

    /// Curve `k` as CSV text (empty for sets loaded from `set.json`).
    fn curve_csv(&self, k: usize) -> PyResult<String> {
        let c = self
            .inner
            .curves
            .get(k)
            .ok_or_else(|| PyValueError::new_err(format!("no curve {k}")))?;
        Ok(export::curve_table(c).to_csv())
    }

    /// Sampled states of curve `k` in `(S, I)` or `(S, E, I)` order, starting
    /// at the tangent point and running backward in time.
    fn curve_states(&self, k: usize) -> PyResult<Vec<Vec<f64>>> {
        let c = self
            .inner
            .curves
            .get(k)
            .ok_or_else(|| PyValueError::new_err(format!("no curve {k}")))?;
        Ok(c.samples.iter().map(|s| s.state.as_slice().to_vec()).collect())
    }

    /// Summary of the set without curves or mesh.
    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let s = &self.inner;
        let v = serde_json::json!({
            "set_kind": s.set_kind,
            "trivial": s.trivial,
            "classification": s.classification,
            "usable_part": s.usable_part,
            "tangent_set": s.tangent_set,
            "curves": s.curve_summaries,
        });
        to_py(py, &v)
    }

    /// The `set.json` document.
    fn to_json(&self) -> PyResult<String> {
        SetDocument {
            format_version: FORMAT_VERSION,
            set: self.inner.clone(),
            manifest: None,
        }
        .to_json()
        .map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc = SetDocument::from_json(text).map_err(py_err)?;
        Ok(PyComputedSet { inner: doc.set })
    }
}

/// Classification tag and witness inequalities.
#[pyfunction]
fn classify(py: Python<'_>, scenario: &PyScenario) -> PyResult<Py<PyAny>> {
    to_py(py, &analysis::classify(&scenario.inner))
}

#[pyfunction]
#[pyo3(signature = (scenario, kind, n_curves = 30, tol = None))]
fn assemble_set(
    py: Python<'_>,
    scenario: &PyScenario,
    kind: &str,
    n_curves: usize,
    tol: Option<HashMap<String, f64>>,
) -> PyResult<PyComputedSet> {
    let kind = set_kind(kind)?;
    let tol = tolerances(tol)?;
    let sc = scenario.inner.clone();
    let inner = py
        .detach(move || barrier::assemble_set(&sc, kind, n_curves, &tol))
        .map_err(py_err)?;
    Ok(PyComputedSet { inner })
}

fn switching_sets(sc: &epibarrier::Scenario, tol: &Tolerances) -> PyResult<SwitchingSets> {
    let a = barrier::assemble_set(sc, SetKind::Admissible, 1, tol).map_err(py_err)?;
    let m = barrier::assemble_set(sc, SetKind::Mrpi, 1, tol).map_err(py_err)?;
    SwitchingSets::new(sc, a, m).map_err(py_err)
}

/// `policy` is `"switching"`, `"feedback"` (worst-case disturbance) or
/// `"constant"` with `beta` and optional `gamma`, `eta`; `disturbance`
/// overrides the feedback disturbance.
#[pyfunction]
#[pyo3(signature = (scenario, policy, x0, t_end = policy::DEFAULT_T_END, beta = None, gamma = None, eta = None, disturbance = None, tol = None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    scenario: &PyScenario,
    policy: &str,
    x0: Vec<f64>,
    t_end: f64,
    beta: Option<f64>,
    gamma: Option<f64>,
    eta: Option<f64>,
    disturbance: Option<f64>,
    tol: Option<HashMap<String, f64>>,
) -> PyResult<Py<PyAny>> {
    let sc = &scenario.inner;
    let tol = tolerances(tol)?;
    let x0 = state(sc, x0)?;
    let p = match policy {
        "switching" => Policy::SwitchingLaw(switching_sets(sc, &tol)?),
        "feedback" => Policy::feedback(sc, disturbance.unwrap_or_else(|| worst_disturbance(sc))).map_err(py_err)?,
        "constant" => {
            let beta = beta.ok_or_else(|| PyValueError::new_err("constant policy needs beta"))?;
            Policy::constant(sc, beta, gamma, eta).map_err(py_err)?
        }
        other => return Err(PyValueError::new_err(format!("unknown policy {other:?}"))),
    };
    let sc2 = sc.clone();
    let traj = py
        .detach(move || policy::simulate(&sc2, &p, &x0, t_end, &tol))
        .map_err(py_err)?;
    to_py(py, &traj)
}

fn worst_disturbance(sc: &epibarrier::Scenario) -> f64 {
    match sc.variant {
        ModelVariant::SeirImperfect => sc.eta_bounds().hi,
        _ => sc.gamma.lo,
    }
}

/// Feedback runs with the disturbance drawn uniformly; per-trial summaries.
#[pyfunction]
#[pyo3(signature = (scenario, x0, n_trials, seed, t_end = policy::DEFAULT_T_END, tol = None))]
fn monte_carlo(
    py: Python<'_>,
    scenario: &PyScenario,
    x0: Vec<f64>,
    n_trials: usize,
    seed: u64,
    t_end: f64,
    tol: Option<HashMap<String, f64>>,
) -> PyResult<Py<PyAny>> {
    let sc = scenario.inner.clone();
    let tol = tolerances(tol)?;
    let x0 = state(&sc, x0)?;
    let p = Policy::feedback(&sc, worst_disturbance(&sc)).map_err(py_err)?;
    let runs = py
        .detach(move || policy::monte_carlo(&sc, &x0, &p, n_trials, seed, t_end, &tol))
        .map_err(py_err)?;
    let rows: Vec<_> = runs
        .iter()
        .map(|r| {
            serde_json::json!({
                "trial": r.trial,
                "disturbance": r.disturbance,
                "breached": r.trajectory.breached,
                "max_I": r.trajectory.max_i,
                "final_state": r.trajectory.final_state().as_slice(),
            })
        })
        .collect();
    to_py(py, &rows)
}

/// Brute-force check of a claimed verdict at one state.
#[pyfunction]
#[pyo3(signature = (set, x, n_trials = 8, seed = 0))]
fn oracle(py: Python<'_>, set: &PyComputedSet, x: Vec<f64>, n_trials: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let s = &set.inner;
    let sc = &s.scenario;
    let p = state(sc, x)?;
    let sets = match (sc.variant, s.set_kind) {
        (ModelVariant::SirPerfect, SetKind::Admissible) => Some(switching_sets(sc, &s.tolerances)?),
        _ => None,
    };
    let claimed = s.membership(&p).verdict;
    let r = py
        .detach(|| {
            policy::membership_oracle(
                sc,
                s.set_kind,
                &p,
                claimed,
                n_trials,
                seed,
                sets.as_ref(),
                &s.tolerances,
                &OracleOptions::default(),
            )
        })
        .map_err(py_err)?;
    to_py(py, &r)
}

#[pymodule]
#[pyo3(name = "epibarrier")]
fn python_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyComputedSet>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_set, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
