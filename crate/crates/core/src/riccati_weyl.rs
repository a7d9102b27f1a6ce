//! Riccati flow, Weyl functions `M±`, principal functions `N±` and real-axis
//! boundary limits `F±`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::base_flow::BasePoint;
use crate::error::{Error, Result};
use crate::hamiltonian::{CoefficientField, Family};
use crate::linalg;
use crate::ode::StepAction;
use crate::propagator::{integrator, propagate_normalized};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeylRole {
    MPlus,
    MMinus,
    NPlus,
    NMinus,
    FPlus,
    FMinus,
}

impl WeylRole {
    fn is_plus(self) -> bool {
        matches!(self, WeylRole::MPlus | WeylRole::NPlus | WeylRole::FPlus)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylMatrix {
    pub m: DMatrix<Complex64>,
    pub role: WeylRole,
    pub omega: BasePoint,
    pub lambda: Complex64,
    /// Last doubling (or extrapolation) disagreement.
    pub convergence_error: f64,
    /// `‖M − Mᵀ‖` before symmetrization.
    pub symmetry_defect: f64,
    /// Horizon at which the limit was accepted.
    pub horizon: f64,
    /// `‖Im M‖ ≤ tol`, only meaningful for boundary limits.
    pub real: bool,
}

impl WeylMatrix {
    pub fn re(&self) -> DMatrix<f64> {
        linalg::real_part(&self.m)
    }

    pub fn im(&self) -> DMatrix<f64> {
        linalg::imag_part(&self.m)
    }

    /// Smallest eigenvalue of `Im M`.
    pub fn im_min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.im())
    }

    /// Largest eigenvalue of `Im M`.
    pub fn im_max_eigenvalue(&self) -> f64 {
        linalg::max_eigenvalue(&self.im())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeylOptions {
    /// Doubling agreement, relative to `max(1, ‖M‖)`.
    pub tol: f64,
    /// Integrator tolerance.
    pub integ_tol: f64,
    pub t_start: f64,
    pub t_max: f64,
    pub min_doublings: usize,
    /// Smallest admissible singular value of the top block of the orthonormal frame.
    pub nc_threshold: f64,
    pub seed: u64,
}

impl Default for WeylOptions {
    fn default() -> Self {
        WeylOptions { tol: 1e-9, integ_tol: 1e-11, t_start: 8.0, t_max: 4096.0, min_doublings: 3, nc_threshold: 1e-8, seed: 7 }
    }
}

impl WeylOptions {
    /// Starting horizon `8/β̂` from a dichotomy-rate estimate.
    pub fn with_rate(mut self, beta_hat: f64) -> Self {
        if beta_hat.is_finite() && beta_hat > 0.0 {
            self.t_start = (8.0 / beta_hat).clamp(1.0, self.t_max / 8.0);
        }
        self
    }
}

/// Right-hand side `−M H3 M − M H1 − H1ᵀ M + H2` at a base point.
pub fn riccati_rhs<T: Scalar>(field: &CoefficientField, omega: &BasePoint, m: &DMatrix<T>) -> DMatrix<T> {
    let h1 = field.h1::<T>(omega);
    let h2 = field.h2::<T>(omega);
    let h3 = field.h3::<T>(omega);
    -(m * h3 * m) - m * &h1 - h1.transpose() * m + h2
}

/// Default chart bound beyond which a Riccati solution is declared escaping.
pub const CHART_BOUND: f64 = 1e8;

/// Integrates the Riccati equation from `M0` at time 0 to time `t`.
pub fn riccati_flow<T: Scalar>(field: &CoefficientField, omega: &BasePoint, m0: &DMatrix<T>, t: f64, tol: f64) -> Result<DMatrix<T>> {
    riccati_flow_bounded(field, omega, m0, t, tol, CHART_BOUND)
}

pub fn riccati_flow_bounded<T: Scalar>(
    field: &CoefficientField,
    omega: &BasePoint,
    m0: &DMatrix<T>,
    t: f64,
    tol: f64,
    bound: f64,
) -> Result<DMatrix<T>> {
    let n = field.n();
    if m0.shape() != (n, n) {
        return Err(Error::InvalidArgument("M0 has the wrong shape".into()));
    }
    if linalg::symmetry_defect(m0) > 1e-12 * linalg::max_abs(m0).max(1.0) {
        return Err(Error::InvalidArgument("M0 is not symmetric".into()));
    }
    if field.is_complex() && !T::IS_COMPLEX {
        return Err(Error::InvalidArgument("complex field with a real scalar type".into()));
    }
    let flow = field.flow();
    let mut escape = None;
    let sol = integrator(tol)?.integrate(
        |s, m: &DMatrix<T>| riccati_rhs(field, &flow.advance(omega, s), m),
        0.0,
        m0.clone(),
        t,
        |s, m| {
            if linalg::max_abs(m) > bound {
                escape = Some(s);
                StepAction::Stop
            } else {
                StepAction::Continue
            }
        },
    );
    match (sol, escape) {
        (_, Some(t_escape)) => Err(Error::FiniteEscape { t_escape }),
        (Err(Error::Stiffness { t_reached }), None) => Err(Error::FiniteEscape { t_escape: t_reached }),
        (Err(e), None) => Err(e),
        (Ok(s), None) => Ok(s.y),
    }
}

fn initial_plane<T: Scalar>(n: usize, m0: &DMatrix<T>) -> DMatrix<T> {
    linalg::stack(&DMatrix::identity(n, n), m0)
}

/// Small generic symmetric matrix for real starting planes.
fn generic_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    linalg::symmetrize(&g).scale(0.5)
}

struct Limit<T: Scalar> {
    q: DMatrix<T>,
    horizon: f64,
    residual: f64,
}

/// Plane at time 0 of the frame `z0` placed at time `start(T)`, for doubling
/// horizons `T` until the planes (and their graphs, when they exist) agree.
fn plane_limit<T: Scalar>(
    field: &CoefficientField,
    omega: &BasePoint,
    z0: &DMatrix<T>,
    forward: bool,
    opts: &WeylOptions,
) -> Result<Limit<T>> {
    let mut horizon = opts.t_start;
    let mut prev: Option<(DMatrix<T>, Option<DMatrix<T>>)> = None;
    let mut doublings = 0usize;
    let mut residual = f64::INFINITY;
    while horizon <= opts.t_max * (1.0 + 1e-12) {
        let start = if forward { -horizon } else { horizon };
        let nf = propagate_normalized(field, omega, start, z0, 0.0, opts.integ_tol, |_, _, _| StepAction::Continue)?;
        let q = nf.q;
        let graph = if linalg::min_singular(&linalg::top_block(&q)) >= opts.nc_threshold {
            linalg::right_divide(&linalg::bottom_block(&q), &linalg::top_block(&q))
        } else {
            None
        };
        if let Some((pq, pg)) = &prev {
            let dist = linalg::plane_distance(pq, &q);
            residual = match (pg, &graph) {
                (Some(a), Some(b)) => {
                    let scale = linalg::spectral_norm(b).max(1.0);
                    (linalg::spectral_norm(&(b - a)) / scale).max(dist)
                }
                _ => dist,
            };
            doublings += 1;
            if doublings >= opts.min_doublings && residual <= opts.tol {
                return Ok(Limit { q, horizon, residual });
            }
        }
        prev = Some((q, graph));
        horizon *= 2.0;
    }
    Err(Error::NoConvergence { t_max: opts.t_max, residual })
}

fn weyl_generic<T: Scalar>(field: &CoefficientField, omega: &BasePoint, role: WeylRole, opts: &WeylOptions) -> Result<WeylMatrix> {
    let n = field.n();
    let lambda = field.parameter();
    let plus = role.is_plus();
    let z0: DMatrix<T> = match role {
        WeylRole::NPlus | WeylRole::NMinus => linalg::stack(&DMatrix::zeros(n, n), &DMatrix::identity(n, n)),
        _ if T::IS_COMPLEX => {
            // upper/lower Siegel half-space, matching the expected sign of Im M±
            let s = if lambda.im < 0.0 { -1.0 } else { 1.0 };
            let s = if plus { s } else { -s };
            let m0 = DMatrix::<T>::identity(n, n) * T::from_c64(Complex64::new(0.0, s));
            initial_plane(n, &m0)
        }
        _ => {
            let m0 = generic_symmetric(n, opts.seed).map(T::from_real);
            initial_plane(n, &m0)
        }
    };
    let lim = plane_limit(field, omega, &z0, !plus, opts)?;
    let top = linalg::top_block(&lim.q);
    let sigma_min = linalg::min_singular(&top);
    if sigma_min < opts.nc_threshold {
        return Err(match role {
            WeylRole::NPlus | WeylRole::NMinus => Error::NonInvertibleTopBlock { sigma_min },
            _ => Error::NcFailure { sigma_min },
        });
    }
    let m = linalg::right_divide(&linalg::bottom_block(&lim.q), &top).ok_or(Error::NcFailure { sigma_min })?;
    let symmetry_defect = linalg::symmetry_defect(&m);
    let m = linalg::to_complex(&linalg::symmetrize(&m));
    Ok(WeylMatrix {
        m,
        role,
        omega: omega.clone(),
        lambda,
        convergence_error: lim.residual,
        symmetry_defect,
        horizon: lim.horizon,
        real: !T::IS_COMPLEX,
    })
}

fn weyl_dispatch(field: &CoefficientField, omega: &BasePoint, role: WeylRole, opts: &WeylOptions) -> Result<WeylMatrix> {
    if field.is_complex() {
        weyl_generic::<Complex64>(field, omega, role, opts)
    } else {
        weyl_generic::<f64>(field, omega, role, opts)
    }
}

/// `M⁺(ω)` of the system described by `field` (the spectral parameter is
/// read from the field's perturbation tags).
pub fn weyl_plus(field: &CoefficientField, omega: &BasePoint, opts: &WeylOptions) -> Result<WeylMatrix> {
    weyl_dispatch(field, omega, WeylRole::MPlus, opts)
}

pub fn weyl_minus(field: &CoefficientField, omega: &BasePoint, opts: &WeylOptions) -> Result<WeylMatrix> {
    weyl_dispatch(field, omega, WeylRole::MMinus, opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct PrincipalFunctions {
    pub plus: WeylMatrix,
    pub minus: WeylMatrix,
    /// Smallest eigenvalue of `N⁻ − N⁺`.
    pub ordering_slack: f64,
    pub ordered: bool,
}

pub fn principal_functions(field: &CoefficientField, omega: &BasePoint, opts: &WeylOptions) -> Result<PrincipalFunctions> {
    if field.is_complex() {
        return Err(Error::InvalidArgument("principal functions need a real field".into()));
    }
    let plus = weyl_generic::<f64>(field, omega, WeylRole::NPlus, opts)?;
    let minus = weyl_generic::<f64>(field, omega, WeylRole::NMinus, opts)?;
    let ordering_slack = linalg::min_eigenvalue(&(minus.re() - plus.re()));
    Ok(PrincipalFunctions { plus, minus, ordering_slack, ordered: ordering_slack >= -1e-7 })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryOptions {
    pub beta0: f64,
    pub levels: usize,
    /// Largest accepted disagreement between the last two extrapolants,
    /// relative to `max(1, ‖F‖)`.
    pub divergence_tol: f64,
    /// `‖Im F‖` below which the limit is flagged real.
    pub real_tol: f64,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions { beta0: 0.1, levels: 4, divergence_tol: 1e-4, real_tol: 1e-6 }
    }
}

/// Neville extrapolation to `x = 0` of matrix samples `ys` at nodes `xs`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let mut p: Vec<DMatrix<Complex64>> = ys.to_vec();
    let k = xs.len();
    for level in 1..k {
        for i in 0..k - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            // P_{i..j}(0) = (xj P_{i..j-1} − xi P_{i+1..j}) / (xj − xi)
            p[i] = (&p[i] * Complex64::new(xj, 0.0) - &p[i + 1] * Complex64::new(xi, 0.0)) / Complex64::new(xj - xi, 0.0);
        }
    }
    p.swap_remove(0)
}

/// `F±(ω, α) = lim_{β↓0} M±(ω, α + iβ)` by Richardson extrapolation over
/// `β_k = β0 2^{-k}`.
pub fn boundary_limit(
    family: &Family,
    omega: &BasePoint,
    alpha: f64,
    role: WeylRole,
    bopts: &BoundaryOptions,
    wopts: &WeylOptions,
) -> Result<WeylMatrix> {
    if bopts.levels < 2 {
        return Err(Error::InvalidArgument("boundary limit needs at least two levels".into()));
    }
    let plus = match role {
        WeylRole::FPlus | WeylRole::MPlus => true,
        WeylRole::FMinus | WeylRole::MMinus => false,
        _ => return Err(Error::InvalidArgument("boundary limits exist for F+ and F- only".into())),
    };
    let betas: Vec<f64> = (0..bopts.levels).map(|k| bopts.beta0 * 0.5f64.powi(k as i32)).collect();
    let samples: Vec<DMatrix<Complex64>> = betas
        .iter()
        .map(|&b| {
            let f = family.at(Complex64::new(alpha, b));
            let w = if plus { weyl_plus(&f, omega, wopts) } else { weyl_minus(&f, omega, wopts) };
            w.map(|w| w.m)
        })
        .collect::<Result<_>>()?;
    let all = extrapolate_to_zero(&betas, &samples);
    let fewer = extrapolate_to_zero(&betas[..betas.len() - 1], &samples[..samples.len() - 1]);
    let defect = linalg::spectral_norm(&(&all - &fewer)) / linalg::spectral_norm(&all).max(1.0);
    if defect > bopts.divergence_tol {
        return Err(Error::DivergentLimit { defect });
    }
    let symmetry_defect = linalg::symmetry_defect(&all);
    let m = linalg::symmetrize(&all);
    let real = linalg::max_abs(&linalg::imag_part(&m)) <= bopts.real_tol;
    Ok(WeylMatrix {
        m,
        role: if plus { WeylRole::FPlus } else { WeylRole::FMinus },
        omega: omega.clone(),
        lambda: Complex64::new(alpha, 0.0),
        convergence_error: defect,
        symmetry_defect,
        horizon: f64::NAN,
        real,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::FamilyKind;

    fn m1(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn tanh_solves_scalar_riccati() {
        let f = CoefficientField::constant(m1(0.0), m1(1.0), m1(1.0), None).unwrap();
        let m = riccati_flow(&f, &f.flow().origin(), &m1(0.0), 1.0, 1e-12).unwrap();
        assert!((m[(0, 0)] - 1f64.tanh()).abs() < 1e-10);
    }

    #[test]
    fn escape_is_detected() {
        // M' = -M², M0 = -1 blows up at t = 1
        let f = CoefficientField::constant(m1(0.0), m1(0.0), m1(1.0), None).unwrap();
        let r = riccati_flow(&f, &f.flow().origin(), &m1(-1.0), 2.0, 1e-10);
        match r {
            Err(Error::FiniteEscape { t_escape }) => assert!((t_escape - 1.0).abs() < 1e-3),
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn neville_is_exact_on_polynomials() {
        let xs = [0.4, 0.2, 0.1];
        let ys: Vec<_> = xs.iter().map(|x| DMatrix::from_element(1, 1, Complex64::new(2.0 + 3.0 * x - x * x, 0.0))).collect();
        assert!((extrapolate_to_zero(&xs, &ys)[(0, 0)] - Complex64::new(2.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn weyl_of_hyperbolic_pair() {
        let f = CoefficientField::constant(m1(0.0), m1(1.0), m1(1.0), Some(m1(1.0))).unwrap();
        let o = f.flow().origin();
        let opts = WeylOptions::default();
        assert!((weyl_plus(&f, &o, &opts).unwrap().m[(0, 0)].re + 1.0).abs() < 1e-8);
        assert!((weyl_minus(&f, &o, &opts).unwrap().m[(0, 0)].re - 1.0).abs() < 1e-8);
        let fam = Family::new(f, FamilyKind::H2).unwrap();
        let w = weyl_plus(&fam.at(Complex64::new(2.0, 1.0)), &o, &opts).unwrap();
        let exact = -(Complex64::new(1.0, 0.0) - Complex64::new(2.0, 1.0)).sqrt();
        let exact = if exact.im < 0.0 { -exact } else { exact };
        assert!((w.m[(0, 0)] - exact).norm() < 1e-7, "{} vs {exact}", w.m[(0, 0)]);
    }
}
