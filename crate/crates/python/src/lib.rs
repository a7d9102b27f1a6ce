//! Python bindings: `hamdich.Family` and `hamdich.LQProblem`.
//!
//! Matrices cross the boundary as nested lists (row-major), complex
//! parameters as Python `complex`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use hamdich::base_flow::BasePoint;
use hamdich::dichotomy::{classify_family, default_probes, detect_ed, nonoscillation_check, uwd_test, ClassifyOptions, EdThresholds, UwdOptions};
use hamdich::hamiltonian::{Family, FamilyKind};
use hamdich::lq_control::{solvability_check, synthesize, LQProblem, SynthesisOptions};
use hamdich::param_scan::{find_alpha_star, herglotz_fit, rho_curve, weyl_sampler, HerglotzOptions, ScanOptions};
use hamdich::problem::ProblemFile;
use hamdich::propagator::fundamental_matrix;
use hamdich::riccati_weyl::{weyl_minus, weyl_plus, WeylOptions, WeylRole};
use hamdich::rotation::{rotation_number, rotation_profile, DEFAULT_HORIZON};
use hamdich::presets;

create_exception!(hamdich, HamdichError, PyException);

const GRID_DT: f64 = 0.7548776662466927;

fn err(e: hamdich::Error) -> PyErr {
    HamdichError::new_err(e.to_string())
}

fn rows<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[pyclass(name = "Family", module = "hamdich", frozen)]
struct PyFamily {
    inner: Family,
}

impl PyFamily {
    fn grid(&self, count: usize) -> Vec<BasePoint> {
        self.inner.base.flow().grid(count, GRID_DT)
    }

    fn point(&self, coords: Option<Vec<f64>>) -> PyResult<BasePoint> {
        match coords {
            Some(c) => self.inner.base.flow().point(c).map_err(err),
            None => Ok(self.inner.base.flow().origin()),
        }
    }
}

#[pymethods]
impl PyFamily {
    /// Built-in family by name.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(PyFamily { inner: presets::family(name).map_err(err)? })
    }

    /// Family from the JSON text of a problem file.
    #[staticmethod]
    fn from_json(src: &str) -> PyResult<Self> {
        let p = ProblemFile::parse(src).map_err(err)?;
        Ok(PyFamily { inner: p.family().map_err(err)? })
    }

    #[staticmethod]
    fn preset_names() -> Vec<&'static str> {
        presets::NAMES.to_vec()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.base.n()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            FamilyKind::H3 => "h3",
            FamilyKind::H2 => "h2",
        }
    }

    /// Hamiltonian matrix of the real member `alpha` at a base point.
    #[pyo3(signature = (alpha, point=None))]
    fn hamiltonian(&self, alpha: f64, point: Option<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let w = self.point(point)?;
        Ok(rows(&self.inner.at_real(alpha).eval_h::<f64>(&w).map_err(err)?))
    }

    /// `(verdict, beta_hat, eta_hat)` on an orbit grid of `grid` points.
    #[pyo3(signature = (lam, grid=8))]
    fn detect_ed(&self, lam: Complex64, grid: usize) -> PyResult<(String, f64, f64)> {
        let r = detect_ed(&self.inner.at(lam), &self.grid(grid), &EdThresholds::default()).map_err(err)?;
        Ok((format!("{:?}", r.verdict), r.beta_hat, r.eta_hat))
    }

    /// ED together with nonoscillation at `lam`.
    #[pyo3(signature = (lam, grid=8))]
    fn ed_and_nc(&self, lam: Complex64, grid: usize) -> PyResult<bool> {
        let r = detect_ed(&self.inner.at(lam), &self.grid(grid), &EdThresholds::default()).map_err(err)?;
        Ok(r.is_ed() && nonoscillation_check(&r).map_err(err)?.holds)
    }

    #[pyo3(signature = (alpha, grid=8))]
    fn uwd(&self, alpha: f64, grid: usize) -> PyResult<bool> {
        Ok(uwd_test(&self.inner.at_real(alpha), &self.grid(grid), &UwdOptions::default()).map_err(err)?.verdict)
    }

    #[pyo3(signature = (lam, point=None))]
    fn weyl_plus(&self, lam: Complex64, point: Option<Vec<f64>>) -> PyResult<Vec<Vec<Complex64>>> {
        let w = self.point(point)?;
        Ok(rows(&weyl_plus(&self.inner.at(lam), &w, &WeylOptions::default()).map_err(err)?.m))
    }

    #[pyo3(signature = (lam, point=None))]
    fn weyl_minus(&self, lam: Complex64, point: Option<Vec<f64>>) -> PyResult<Vec<Vec<Complex64>>> {
        let w = self.point(point)?;
        Ok(rows(&weyl_minus(&self.inner.at(lam), &w, &WeylOptions::default()).map_err(err)?.m))
    }

    /// Fundamental matrix of the real member `alpha` over `[0, t]`.
    #[pyo3(signature = (alpha, t, point=None, tol=1e-12))]
    fn fundamental_matrix(&self, alpha: f64, t: f64, point: Option<Vec<f64>>, tol: f64) -> PyResult<Vec<Vec<f64>>> {
        let w = self.point(point)?;
        Ok(rows(&fundamental_matrix::<f64>(&self.inner.at_real(alpha), &w, t, tol).map_err(err)?.u))
    }

    /// `(value, error_bar)`.
    #[pyo3(signature = (alpha, horizon=DEFAULT_HORIZON, tol=1e-10))]
    fn rotation_number(&self, alpha: f64, horizon: f64, tol: f64) -> PyResult<(f64, f64)> {
        let f = self.inner.at_real(alpha);
        let r = rotation_number(&f, &f.flow().origin(), horizon, tol).map_err(err)?;
        Ok((r.value, r.error_bar))
    }

    /// Rows `(alpha, value, error_bar)` over an increasing grid.
    #[pyo3(signature = (alphas, horizon=DEFAULT_HORIZON, tol=1e-10))]
    fn rotation_profile(&self, alphas: Vec<f64>, horizon: f64, tol: f64) -> PyResult<Vec<(f64, f64, f64)>> {
        let p = rotation_profile(&self.inner, &self.inner.base.flow().origin(), &alphas, horizon, tol).map_err(err)?;
        Ok(p.rows.iter().map(|r| (r.alpha, r.estimate.value, r.estimate.error_bar)).collect())
    }

    /// Right end of the ED + NC interval; `inf` when the bracket cap passes.
    #[pyo3(signature = (grid=8))]
    fn alpha_star(&self, grid: usize) -> PyResult<f64> {
        Ok(find_alpha_star(&self.inner, &self.grid(grid), &ScanOptions::default()).map_err(err)?.alpha_star)
    }

    /// Rows `(alpha, rho)`.
    #[pyo3(signature = (alphas, grid=8))]
    fn rho(&self, alphas: Vec<f64>, grid: usize) -> PyResult<Vec<(f64, f64)>> {
        let rows = rho_curve(&self.inner, &self.grid(grid), &alphas, &ScanOptions::default()).map_err(err)?;
        Ok(rows.iter().map(|r| (r.alpha, r.rho)).collect())
    }

    /// `"O1"`, `"O2"` or `"Undetermined"`.
    #[pyo3(signature = (grid=8))]
    fn classify(&self, grid: usize) -> PyResult<String> {
        let r = classify_family(&self.inner, &self.grid(grid), &default_probes(), &EdThresholds::default(), &ClassifyOptions::default())
            .map_err(err)?;
        Ok(format!("{:?}", r.class))
    }

    /// `(L, K, masses)` for `M⁺` (`role="plus"`) or `M⁻`, masses being the
    /// traces of the measure on each window.
    #[pyo3(signature = (windows, role="plus"))]
    fn herglotz(&self, windows: Vec<(f64, f64)>, role: &str) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
        let role = match role {
            "plus" => WeylRole::MPlus,
            "minus" => WeylRole::MMinus,
            _ => return Err(PyValueError::new_err("role must be 'plus' or 'minus'")),
        };
        let o = self.inner.base.flow().origin();
        let sampler = weyl_sampler(&self.inner, &o, role, WeylOptions::default());
        let h = herglotz_fit(&sampler, &windows, &HerglotzOptions::default()).map_err(err)?;
        Ok((rows(&h.l), rows(&h.k), h.measure_samples.iter().map(|s| s.mass.trace()).collect()))
    }

    fn __repr__(&self) -> String {
        format!("Family(n={}, kind={})", self.n(), self.kind())
    }
}

#[pyclass(name = "LQProblem", module = "hamdich", frozen)]
struct PyLQProblem {
    inner: LQProblem,
}

#[pymethods]
impl PyLQProblem {
    /// `x' = u`, `Q = ½(x² + u²)`, `x0 = 1`.
    #[staticmethod]
    fn scalar() -> Self {
        PyLQProblem { inner: presets::scalar_lq() }
    }

    #[staticmethod]
    fn from_json(src: &str) -> PyResult<Self> {
        Ok(PyLQProblem { inner: LQProblem::from_json_str(src).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    /// `True`/`False`, or `None` when ED detection was inconclusive.
    #[pyo3(signature = (grid=16))]
    fn solvable(&self, grid: usize) -> PyResult<Option<bool>> {
        let g = self.inner.flow.grid(grid, GRID_DT);
        Ok(solvability_check(&self.inner, &g, &EdThresholds::default()).map_err(err)?.solvable)
    }

    /// `(J, trajectory)` with trajectory rows `(t, x, u)`.
    #[pyo3(signature = (t_report=20.0, samples=200))]
    fn synthesize(&self, t_report: f64, samples: usize) -> PyResult<(f64, Vec<(f64, Vec<f64>, Vec<f64>)>)> {
        let opts = SynthesisOptions { t_report, samples, ..SynthesisOptions::default() };
        let s = synthesize(&self.inner, &self.inner.flow.origin(), &opts).map_err(err)?;
        let traj = s.trajectory.iter().map(|r| (r.t, r.x.clone(), r.u.clone())).collect();
        Ok((s.total_value(), traj))
    }

    fn __repr__(&self) -> String {
        format!("LQProblem(n={}, m={})", self.inner.n, self.inner.m)
    }
}

#[pymodule]
#[pyo3(name = "hamdich")]
fn hamdich_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("HamdichError", m.py().get_type::<HamdichError>())?;
    m.add_class::<PyFamily>()?;
    m.add_class::<PyLQProblem>()?;
    Ok(())
}
