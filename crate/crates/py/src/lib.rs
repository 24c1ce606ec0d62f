//! Python bindings for `slevolve_core`.
//!
//! Structured results come back as plain dicts and lists.

#![allow(non_snake_case)]

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use slevolve_core::affine::{self as core_affine, AffineParams as CoreAffine};
use slevolve_core::centred::{self, CentredParams as CoreCentred, Family, SearchOptions, Signature};
use slevolve_core::evodata::EvolutionData as CoreData;
use slevolve_core::evolver::{self, EvolMap, EvolveOptions};
use slevolve_core::meshverify::{self, Mesh as CoreMesh, Projection};
use slevolve_core::ode::OdeOptions;
use slevolve_core::threefold::{self, Affine3Variant};
use slevolve_core::SlError;

fn err(e: SlError) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for slevolve_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

fn ode(rtol: f64, atol: f64) -> OdeOptions {
    OdeOptions {
        rtol,
        atol,
        ..OdeOptions::default()
    }
}

fn case_letter(c: centred::Case) -> &'static str {
    match c {
        centred::Case::A => "a",
        centred::Case::B => "b",
        centred::Case::C => "c",
        centred::Case::D => "d",
    }
}

/// Evolving centred quadric: signature `(a, alphas)`, invariant `A` and level `c`.
#[pyclass(module = "slevolve", frozen)]
struct CentredParams(CoreCentred);

#[pymethods]
impl CentredParams {
    #[new]
    #[pyo3(signature = (a, alphas, A, c = 1.0))]
    fn new(a: usize, alphas: Vec<f64>, A: f64, c: f64) -> PyResult<Self> {
        CoreCentred::new(a, alphas, A, c).py().map(Self)
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m
    }

    #[getter]
    fn a(&self) -> usize {
        self.0.a
    }

    #[getter]
    fn alphas(&self) -> Vec<f64> {
        self.0.alphas.clone()
    }

    #[getter]
    fn A(&self) -> f64 {
        self.0.big_a
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.c
    }

    /// Largest admissible `A` for the signature.
    fn a_max(&self) -> f64 {
        self.0.signature().a_max()
    }

    /// One of `"a"`, `"b"`, `"c"`, `"d"`.
    fn case(&self) -> PyResult<&'static str> {
        centred::classify_case(&self.0).py().map(case_letter)
    }

    fn initial_w(&self) -> PyResult<Vec<Complex64>> {
        self.0.initial_w().py()
    }

    /// Phase advances and period by quadrature.
    fn betas<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &centred::betas(&self.0).py()?)
    }

    /// Period and phase advances measured on the ODE solution.
    #[pyo3(signature = (rtol = 1e-10, atol = 1e-12))]
    fn period_from_ode<'py>(&self, py: Python<'py>, rtol: f64, atol: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &centred::period_from_ode(&self.0, ode(rtol, atol)).py()?)
    }

    /// Quad mesh of the family over `t_span` (analytic residuals attached).
    #[pyo3(signature = (t_span, nt = 21, res = 16, radius = 2.0, rtol = 1e-10, atol = 1e-12))]
    fn mesh(&self, t_span: (f64, f64), nt: usize, res: usize, radius: f64, rtol: f64, atol: f64) -> PyResult<Mesh> {
        meshverify::mesh_centred(&self.0, self.0.c, t_span, nt, res, radius, ode(rtol, atol))
            .py()
            .map(Mesh)
    }

    fn __repr__(&self) -> String {
        format!(
            "CentredParams(a={}, alphas={:?}, A={:?}, c={:?})",
            self.0.a, self.0.alphas, self.0.big_a, self.0.c
        )
    }
}

/// Evolving paraboloid in `C^m`, with `m - 1` alphas and constant `C`.
#[pyclass(module = "slevolve", frozen)]
struct AffineParams(CoreAffine);

#[pymethods]
impl AffineParams {
    #[new]
    #[pyo3(signature = (a, alphas, A, C = Complex64::new(0.0, 0.0)))]
    fn new(a: usize, alphas: Vec<f64>, A: f64, C: Complex64) -> PyResult<Self> {
        CoreAffine::new(a, alphas, A, C).py().map(Self)
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m
    }

    fn case<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &core_affine::classify_affine_case(&self.0).py()?)
    }

    /// `(T, defect)`: one period and the deviation from the expected shift.
    #[pyo3(signature = (rtol = 1e-10, atol = 1e-12))]
    fn translation_defect(&self, rtol: f64, atol: f64) -> PyResult<(f64, f64)> {
        core_affine::translation_defect(&self.0, ode(rtol, atol)).py()
    }

    /// Samples of `(w, beta)` at `times`.
    #[pyo3(signature = (times, rtol = 1e-10, atol = 1e-12))]
    fn integrate<'py>(&self, py: Python<'py>, times: Vec<f64>, rtol: f64, atol: f64) -> PyResult<Bound<'py, PyAny>> {
        let s0 = self.0.initial_state().py()?;
        to_py(py, &core_affine::integrate_affine(self.0.a, &s0, &times, ode(rtol, atol)).py()?)
    }

    #[pyo3(signature = (t_span, nt = 21, res = 16, radius = 2.0, rtol = 1e-10, atol = 1e-12))]
    fn mesh(&self, t_span: (f64, f64), nt: usize, res: usize, radius: f64, rtol: f64, atol: f64) -> PyResult<Mesh> {
        meshverify::mesh_affine(&self.0, t_span, nt, res, radius, ode(rtol, atol))
            .py()
            .map(Mesh)
    }
}

/// Quad mesh in `R^{2m}`.
#[pyclass(module = "slevolve")]
struct Mesh(CoreMesh);

#[pymethods]
impl Mesh {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CoreMesh::from_json(text).py().map(Self)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    /// Wavefront OBJ; `projection` is `"pca"` or `"i,j,k"` (needed for m > 3).
    #[pyo3(signature = (projection = None))]
    fn to_obj(&self, projection: Option<&str>) -> PyResult<String> {
        let p = projection.map(str::parse::<Projection>).transpose().py()?;
        self.0.to_obj(p.as_ref()).py()
    }

    #[pyo3(signature = (projection = None))]
    fn to_ply(&self, projection: Option<&str>) -> PyResult<String> {
        let p = projection.map(str::parse::<Projection>).transpose().py()?;
        self.0.to_ply(p.as_ref()).py()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m
    }

    #[getter]
    fn vertices(&self) -> Vec<Vec<f64>> {
        self.0.vertices.clone()
    }

    #[getter]
    fn faces(&self) -> Vec<[usize; 4]> {
        self.0.faces.clone()
    }

    /// Residual report from the stored analytic frames, if any.
    fn analytic_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.analytic_report())
    }

    /// Residual report from finite-difference tangents on the grid.
    fn fd_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.fd_report().py()?)
    }

    fn __len__(&self) -> usize {
        self.0.vertices.len()
    }
}

/// Closed-curve cross-section of the three-dimensional cones.
#[pyclass(module = "slevolve", frozen)]
struct CrossSection(threefold::CrossSection);

#[pymethods]
impl CrossSection {
    #[new]
    fn new(alphas: [f64; 3]) -> PyResult<Self> {
        threefold::cross_section(alphas).py().map(Self)
    }

    fn period(&self) -> PyResult<f64> {
        self.0.period().py()
    }

    /// `(x, dx/ds)` at arclength parameter `s`.
    fn at(&self, s: f64) -> PyResult<([f64; 3], [f64; 3])> {
        let p = self.0.at(s).py()?;
        Ok((p.x, p.dx))
    }

    fn v(&self, s: f64) -> PyResult<f64> {
        self.0.v(s).py()
    }

    fn constraint_residuals(&self, s: f64) -> PyResult<(f64, f64)> {
        self.0.constraint_residuals(s).py()
    }
}

/// Closed-form three-dimensional solutions; `variant` is `"a2"` or `"a1"`.
#[pyclass(module = "slevolve", frozen)]
struct Affine3(threefold::Affine3);

#[pymethods]
impl Affine3 {
    #[new]
    fn new(variant: &str, w1: Complex64, w2: Complex64, beta0: Complex64) -> PyResult<Self> {
        let v = match variant {
            "a2" => Affine3Variant::A2,
            "a1" => Affine3Variant::A1,
            other => return Err(PyValueError::new_err(format!("unknown variant {other:?}"))),
        };
        threefold::Affine3::from_initial(v, w1, w2, beta0).py().map(Self)
    }

    #[getter]
    fn A(&self) -> f64 {
        self.0.big_a()
    }

    fn w(&self, t: f64) -> [Complex64; 2] {
        self.0.w(t)
    }

    fn beta(&self, t: f64) -> Complex64 {
        self.0.beta(t)
    }

    fn point(&self, x1: f64, x2: f64, t: f64) -> [Complex64; 3] {
        self.0.point(x1, x2, t)
    }

    fn ode_residual(&self, t: f64) -> f64 {
        self.0.ode_residual(t)
    }
}

/// Evolution data `(P, chi)` read from its JSON form.
#[pyclass(module = "slevolve", frozen)]
struct EvolutionData(CoreData);

#[pymethods]
impl EvolutionData {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CoreData::from_json(text).py().map(Self)
    }

    #[staticmethod]
    fn centred_quadric(m: usize, a: usize, c: f64) -> PyResult<Self> {
        slevolve_core::evodata::centred_quadric(m, a, c).py().map(Self)
    }

    #[staticmethod]
    fn paraboloid(m: usize, a: usize) -> PyResult<Self> {
        slevolve_core::evodata::paraboloid(m, a).py().map(Self)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    /// Integrates the general flow from `diag(w0)` (identity by default).
    #[pyo3(signature = (t_end, w0 = None, steps = 100, samples = 16, seed = 1, rtol = 1e-10, atol = 1e-12))]
    #[allow(clippy::too_many_arguments)]
    fn evolve<'py>(
        &self,
        py: Python<'py>,
        t_end: f64,
        w0: Option<Vec<Complex64>>,
        steps: usize,
        samples: usize,
        seed: u64,
        rtol: f64,
        atol: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let w0 = w0.unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); self.0.n]);
        let opts = EvolveOptions {
            ode: ode(rtol, atol),
            steps,
            samples,
            seed,
            ..EvolveOptions::default()
        };
        to_py(py, &evolver::integrate(&EvolMap::diagonal(&w0), &self.0, t_end, &opts).py()?)
    }
}

/// Samples of the centred `w`-system at `times`.
#[pyfunction]
#[pyo3(signature = (a, w0, times, rtol = 1e-10, atol = 1e-12))]
fn integrate_w<'py>(
    py: Python<'py>,
    a: usize,
    w0: Vec<Complex64>,
    times: Vec<f64>,
    rtol: f64,
    atol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &centred::integrate_w(a, &w0, &times, ode(rtol, atol)).py()?)
}

/// Limits of the phase advances as `A -> 0` and `A -> A_max`.
#[pyfunction]
fn beta_limits<'py>(py: Python<'py>, a: usize, alphas: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let sig = Signature::new(a, alphas).py()?;
    to_py(py, &centred::beta_limits(&sig).py()?)
}

/// `(numerators, b)` with `beta_j = pi a_j / b`, or `None`.
#[pyfunction]
#[pyo3(signature = (betas, b_max = 8, tol = 1e-8))]
fn rationalize(betas: Vec<f64>, b_max: i64, tol: f64) -> Option<(Vec<i64>, i64)> {
    centred::rationalize(&betas, b_max, tol)
}

/// Periodic parameters in a family: `"sym"`, `"line"` or `"fixed"`.
#[pyfunction]
#[pyo3(signature = (family = "sym", b_max = 8, tol = 1e-8, a = 1, alphas = None, s_range = (1.2, 6.0), grid = 48, s_grid = 24))]
#[allow(clippy::too_many_arguments)]
fn periodic_search<'py>(
    py: Python<'py>,
    family: &str,
    b_max: i64,
    tol: f64,
    a: usize,
    alphas: Option<Vec<f64>>,
    s_range: (f64, f64),
    grid: usize,
    s_grid: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let fam = match (family, alphas) {
        ("sym", _) => Family::Sym,
        ("line", _) => Family::Line {
            s_min: s_range.0,
            s_max: s_range.1,
        },
        ("fixed", Some(alphas)) => Family::Fixed { a, alphas },
        ("fixed", None) => return Err(PyValueError::new_err("family 'fixed' needs alphas")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
    };
    let opts = SearchOptions {
        b_max,
        tol,
        grid,
        s_grid,
    };
    let sols = py.detach(|| centred::periodic_search(&fam, &opts)).py()?;
    to_py(py, &sols)
}

/// Topology of the periodic surface with phase numerators `numerators`.
#[pyfunction]
fn classify_topology<'py>(py: Python<'py>, m: usize, a: usize, numerators: Vec<i64>, c: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &centred::classify_topology(m, a, &numerators, c).py()?)
}

#[pymodule]
fn slevolve(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", slevolve_core::VERSION)?;
    m.add_class::<CentredParams>()?;
    m.add_class::<AffineParams>()?;
    m.add_class::<Mesh>()?;
    m.add_class::<CrossSection>()?;
    m.add_class::<Affine3>()?;
    m.add_class::<EvolutionData>()?;
    m.add_function(wrap_pyfunction!(integrate_w, m)?)?;
    m.add_function(wrap_pyfunction!(beta_limits, m)?)?;
    m.add_function(wrap_pyfunction!(rationalize, m)?)?;
    m.add_function(wrap_pyfunction!(periodic_search, m)?)?;
    m.add_function(wrap_pyfunction!(classify_topology, m)?)?;
    Ok(())
}
