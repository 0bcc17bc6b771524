//! Python bindings for the Dirac spectral toolkit.
//!
//! Structured reports (theorem verdicts, diagnostics, trend checks) come back as plain
//! dicts; complex entries inside them are `[re, im]` pairs.

use dirac_spectral::asymptotics::{self, Lemma, Sector};
use dirac_spectral::completeness::{self, TestFunction};
use dirac_spectral::spectrum::{self, Rect};
use dirac_spectral::{chardet, transfer, BoundaryMatrix, Error, Potential, ProblemSpec, C64};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(pydirac, DiracError, PyException);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Expression { .. } => PyValueError::new_err(e.to_string()),
        other => DiracError::new_err(other.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| DiracError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn rect(r: (f64, f64, f64, f64)) -> PyResult<Rect> {
    Rect::new(r.0, r.1, r.2, r.3).map_err(py_err)
}

/// Boundary value problem: potential `(P, Q)` given as expressions in `x` and a 2x4
/// boundary matrix.
#[pyclass(name = "Problem", module = "pydirac", frozen)]
pub struct PyProblem {
    spec: ProblemSpec,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (p, q, bc, grid_size = 32))]
    fn new(p: &str, q: &str, bc: [[C64; 4]; 2], grid_size: usize) -> PyResult<Self> {
        let potential = Potential::from_exprs(p, q).map_err(py_err)?;
        let bc = BoundaryMatrix::new(bc).map_err(py_err)?;
        let spec = ProblemSpec::new(potential, bc, grid_size, Default::default()).map_err(py_err)?;
        Ok(Self { spec })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            spec: ProblemSpec::from_json(text).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.spec.to_json().map_err(py_err)
    }

    #[getter]
    fn spec_hash(&self) -> String {
        self.spec.spec_hash()
    }

    /// "Regular", "Irregular" or "Degenerate".
    fn classify(&self) -> String {
        format!("{:?}", self.spec.bc().classify())
    }

    fn minors(&self) -> Vec<(String, C64)> {
        let m = self.spec.bc().minors();
        ["12", "13", "14", "23", "24", "34"]
            .iter()
            .zip(m.as_array())
            .map(|(k, v)| (format!("A{k}"), v))
            .collect()
    }

    /// `(Delta, Delta0, error_bound)` at `lam`.
    fn delta(&self, lam: C64) -> PyResult<(C64, C64, f64)> {
        let s = chardet::delta(&self.spec, lam).map_err(py_err)?;
        Ok((s.delta, s.delta0, s.error_bound))
    }

    /// `(x, e11, e12, e21, e22)` on the solution grid.
    #[allow(clippy::type_complexity)]
    fn fundamental_solution(&self, lam: C64) -> PyResult<(Vec<f64>, Vec<C64>, Vec<C64>, Vec<C64>, Vec<C64>)> {
        let e = transfer::solve(&self.spec, lam).map_err(py_err)?;
        let col = |j: usize, k: usize| (0..e.len()).map(|i| e.at(i)[j][k]).collect::<Vec<_>>();
        Ok((e.x().to_vec(), col(0, 0), col(0, 1), col(1, 0), col(1, 1)))
    }

    /// Zeros of `Delta` (with multiplicity) inside `(re0, re1, im0, im1)`.
    fn count_zeros(&self, r: (f64, f64, f64, f64)) -> PyResult<usize> {
        Ok(spectrum::count_zeros_in(&self.spec, &rect(r)?).map_err(py_err)?.0)
    }

    /// `[(lambda, multiplicity)]` inside `(re0, re1, im0, im1)`.
    #[pyo3(signature = (r, max_count = 1000))]
    fn eigenvalues(&self, py: Python<'_>, r: (f64, f64, f64, f64), max_count: usize) -> PyResult<Vec<(C64, usize)>> {
        let r = rect(r)?;
        let evs = py
            .detach(|| spectrum::find_eigenvalues(&self.spec, &r, max_count))
            .map_err(py_err)?;
        Ok(evs.into_iter().map(|e| (e.lambda, e.multiplicity)).collect())
    }

    fn check_theorem<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &completeness::check_theorem(&self.spec))
    }

    /// Residuals of the default test functions for the given radii.
    fn completeness_diagnostic<'py>(&self, py: Python<'py>, radii: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let tests = TestFunction::defaults();
        let d = py
            .detach(|| completeness::completeness_diagnostic(&self.spec, &tests, &radii))
            .map_err(py_err)?;
        to_dict(py, &d)
    }

    /// Trend reports of every prediction of one lemma (4..7) along the ray `arg`.
    fn sector_check<'py>(&self, py: Python<'py>, lemma: u32, arg: f64, radii: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let lemma = Lemma::from_number(lemma).map_err(py_err)?;
        let ray = asymptotics::ray(arg, &radii);
        let reports = asymptotics::predict_sector(&self.spec, lemma)
            .and_then(|preds| {
                preds
                    .iter()
                    .map(|p| asymptotics::verify_sector_prediction(&self.spec, p, &ray))
                    .collect::<Result<Vec<_>, _>>()
            })
            .map_err(py_err)?;
        to_dict(py, &reports)
    }

    /// Lower bound check of `Delta` along the ray `arg` (upper or lower sector by sign).
    fn lower_bound<'py>(&self, py: Python<'py>, arg: f64, radii: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let sector = if arg > 0.0 { Sector::upper() } else { Sector::lower() };
        let r = asymptotics::delta_lower_bound_check(&self.spec, &sector, &asymptotics::ray(arg, &radii))
            .map_err(py_err)?;
        to_dict(py, &r)
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?}, class={:?})", self.spec.potential().kind(), self.spec.bc().classify())
    }
}

/// `int_0^inf x^rho e^{+-2 i lam x} dx` for `lam` off the real axis.
#[pyfunction]
fn kernel_integral(rho: f64, lam: C64) -> PyResult<C64> {
    let half = asymptotics::HalfPlane::of(lam).ok_or_else(|| PyValueError::new_err("lam must not be real"))?;
    asymptotics::kernel_integral(rho, lam, half).map_err(py_err)
}

#[pymodule]
fn pydirac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(kernel_integral, m)?)?;
    m.add("DiracError", m.py().get_type::<DiracError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
