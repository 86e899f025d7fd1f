//! Python bindings: models, the speed analysis, the profile solver, the
//! hypothesis suite and the time stepper. Structured results come back as
//! plain dicts.

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use semiwave_core::asymptotics::{detect_oscillation, fit_decay};
use semiwave_core::chareq;
use semiwave_core::evolution::{self, EvolutionOptions, InitialData};
use semiwave_core::profile::{self, ProfileOptions, ProfileSolution};
use semiwave_core::verify::{self, VerificationReport, VerifyOptions};
use semiwave_core::{Error, ModelSpec, Smoothness};
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Expression(_) | Error::DomainMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Serializes through JSON into Python builtins.
fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A delay reaction functional with its linearization at zero.
#[pyclass(name = "Model", module = "semiwave", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyModel {
    inner: semiwave_core::Model,
}

#[pymethods]
impl PyModel {
    /// Delayed logistic `u(0)(1 - u(-h))`.
    #[staticmethod]
    fn kpp(h: f64) -> PyResult<Self> {
        Ok(Self { inner: semiwave_core::Model::kpp(h).map_err(to_py)? })
    }

    /// `-u(0) + p·u(-h)·exp(-u(-h))`.
    #[staticmethod]
    fn nicholson(h: f64, p: f64) -> PyResult<Self> {
        Ok(Self { inner: semiwave_core::Model::nicholson(h, p).map_err(to_py)? })
    }

    /// `-u(0) + max(p·u(-h)·(1 - (u(-h)/k)^z), 0)`.
    #[staticmethod]
    fn may(h: f64, p: f64, z: f64, k: f64) -> PyResult<Self> {
        Ok(Self { inner: semiwave_core::Model::may(h, p, z, k).map_err(to_py)? })
    }

    /// A model given by an expression in point values `u(s)`, with the
    /// linearization `-q·φ(0) + Σ w·φ(s)` from `atoms = [(s, w), ...]`.
    #[staticmethod]
    #[pyo3(signature = (expr, h, atoms, kappa, q = 0.0, params = None, smoothness = None))]
    fn custom(
        expr: String,
        h: f64,
        atoms: Vec<(f64, f64)>,
        kappa: f64,
        q: f64,
        params: Option<BTreeMap<String, f64>>,
        smoothness: Option<(f64, f64, f64)>,
    ) -> PyResult<Self> {
        let spec = ModelSpec::Custom {
            name: "custom".into(),
            h,
            expr,
            q,
            atoms: atoms.into_iter().map(|(s, w)| [s, w]).collect(),
            kappa,
            params: params.unwrap_or_default(),
            smoothness: smoothness.map(|(k, alpha, delta)| Smoothness { k, alpha, delta }),
        };
        Ok(Self { inner: spec.build().map_err(to_py)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.lin().q()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.inner.lin().p()
    }

    /// The reaction on the constant history `x`.
    fn f_star(&self, x: f64) -> f64 {
        self.inner.f_star(x)
    }

    fn __repr__(&self) -> String {
        format!("Model({}, h={}, kappa={})", self.inner.name(), self.inner.h(), self.inner.kappa())
    }
}

/// `χ(re + i·im, c)` as `(re, im)`.
#[pyfunction]
fn chi(model: &PyModel, re: f64, im: f64, c: f64) -> (f64, f64) {
    let v = chareq::eval_chi(&model.inner, Complex64::new(re, im), c);
    (v.re, v.im)
}

/// Critical speed with both solution routes.
#[pyfunction]
fn critical_speed<'py>(py: Python<'py>, model: &PyModel) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &chareq::critical_speed(&model.inner).map_err(to_py)?)
}

/// `(λ₁, λ₂)` at speed `c`, or `None` below the critical speed.
#[pyfunction]
fn real_roots(model: &PyModel, c: f64) -> PyResult<Option<(f64, f64)>> {
    Ok(chareq::real_roots(&model.inner, c).map_err(to_py)?.map(|r| (r.lambda1, r.lambda2)))
}

/// Speed analysis at `c`, or at the critical speed when `c` is omitted.
#[pyfunction]
#[pyo3(signature = (model, c = None))]
fn analyze<'py>(py: Python<'py>, model: &PyModel, c: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
    let c = match c {
        Some(c) => c,
        None => chareq::critical_speed(&model.inner).map_err(to_py)?.c_star,
    };
    to_dict(py, &chareq::analyze(&model.inner, c).map_err(to_py)?)
}

/// Zeros of `χ(·, c)` in `[re_min, re_max] × [-im_max, im_max]`.
#[pyfunction]
fn count_zeros(model: &PyModel, c: f64, re_min: f64, re_max: f64, im_max: f64) -> PyResult<i64> {
    Ok(chareq::count_zeros_rect(&model.inner, c, (re_min, re_max), im_max).map_err(to_py)?.count)
}

/// A computed wave profile pinned so that it crosses `κ/2` at `t = 0`.
#[pyclass(name = "Profile", module = "semiwave", frozen)]
pub struct PyProfile {
    inner: ProfileSolution,
}

#[pymethods]
impl PyProfile {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.nodes()
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.inner.phi.clone()
    }

    #[getter]
    fn dphi(&self) -> Vec<f64> {
        self.inner.dphi.clone()
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.inner.residual
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn lambda1(&self) -> f64 {
        self.inner.lambda1
    }

    /// `φ(t)`, extended by the tail law and the right constant.
    fn __call__(&self, t: f64) -> f64 {
        self.inner.eval_smooth(t)
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.summary())
    }

    fn decay_fit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &fit_decay(&self.inner).map_err(to_py)?)
    }

    /// `(oscillatory, crossings of κ)`.
    fn oscillation(&self) -> PyResult<(bool, usize)> {
        detect_oscillation(&self.inner).map_err(to_py)
    }

    fn q_diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &verify::diagnostics_q(&self.inner).map_err(to_py)?)
    }

    fn __repr__(&self) -> String {
        format!("Profile(c={}, converged={}, residual={:e})", self.inner.c, self.inner.converged, self.inner.residual)
    }
}

fn profile_options(tol: f64, dt: f64, t_plus: f64, t_minus: Option<f64>, max_iter: usize) -> ProfileOptions {
    ProfileOptions { tol, dt, t_plus, t_minus, max_iter, ..Default::default() }
}

/// Solves for the profile at speed `c`. Releases the GIL while iterating.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (model, c, tol = 1e-9, dt = 0.02, t_plus = 40.0, t_minus = None, max_iter = 20_000))]
fn solve_profile(
    py: Python<'_>,
    model: &PyModel,
    c: f64,
    tol: f64,
    dt: f64,
    t_plus: f64,
    t_minus: Option<f64>,
    max_iter: usize,
) -> PyResult<PyProfile> {
    let opts = profile_options(tol, dt, t_plus, t_minus, max_iter);
    let m = model.inner.clone();
    let sol = py.detach(move || profile::solve_profile(&m, c, &opts)).map_err(to_py)?;
    Ok(PyProfile { inner: sol })
}

/// Sampled hypothesis checks; returns the report as a dict with a
/// top-level `passed` flag.
#[pyfunction(name = "verify")]
#[pyo3(signature = (model, samples = 10_000, seed = 1, epsilon = 0.1))]
fn verify_model<'py>(
    py: Python<'py>,
    model: &PyModel,
    samples: usize,
    seed: u64,
    epsilon: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let m = model.inner.clone();
    let report = py.detach(move || VerificationReport::new(&m, &VerifyOptions { samples, seed, epsilon }));
    let out = to_dict(py, &report)?;
    out.cast::<PyDict>()?.set_item("passed", report.hypotheses_passed())?;
    Ok(out)
}

/// Solves from `seeds` initial guesses and reports aligned distances.
#[pyfunction]
#[pyo3(signature = (model, c, seeds = 5, tol = 1e-9))]
fn uniqueness<'py>(py: Python<'py>, model: &PyModel, c: f64, seeds: usize, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let m = model.inner.clone();
    let opts = ProfileOptions { tol, ..Default::default() };
    let (report, _) = py.detach(move || verify::uniqueness_harness(&m, c, seeds, &opts)).map_err(to_py)?;
    to_dict(py, &report)
}

/// Runs the time stepper from logistic data with tail rate `rate`.
#[pyfunction]
#[pyo3(signature = (model, rate = 0.5, t_end = 30.0, dx = 0.1, x_min = -160.0, x_max = 40.0))]
fn evolve<'py>(
    py: Python<'py>,
    model: &PyModel,
    rate: f64,
    t_end: f64,
    dx: f64,
    x_min: f64,
    x_max: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let m = model.inner.clone();
    let opts = EvolutionOptions {
        initial: InitialData::Tail { rate, at: 0.0 },
        t_end,
        dx,
        x_min,
        x_max,
        ..Default::default()
    };
    let run = py.detach(move || evolution::evolve(&m, &opts)).map_err(to_py)?;
    to_dict(py, &run)
}

#[pymodule]
fn semiwave(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyProfile>()?;
    m.add_function(wrap_pyfunction!(chi, m)?)?;
    m.add_function(wrap_pyfunction!(critical_speed, m)?)?;
    m.add_function(wrap_pyfunction!(real_roots, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(count_zeros, m)?)?;
    m.add_function(wrap_pyfunction!(solve_profile, m)?)?;
    m.add_function(wrap_pyfunction!(verify_model, m)?)?;
    m.add_function(wrap_pyfunction!(uniqueness, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    Ok(())
}
