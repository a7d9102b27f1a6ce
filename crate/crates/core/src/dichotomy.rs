//! Finite-time detection of exponential dichotomy, nonoscillation and uniform
//! weak disconjugacy, the Atkinson condition and the O1/O2 alternative.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::base_flow::BasePoint;
use crate::error::{Error, Result};
use crate::hamiltonian::{CoefficientField, Family, FamilyKind};
use crate::linalg;
use crate::ode::StepAction;
use crate::propagator::{integrator, propagate_normalized, solve, Generator};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    #[serde(rename = "ED")]
    Ed,
    #[serde(rename = "noED")]
    NoEd,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EdThresholds {
    pub beta_min: f64,
    /// Smallest accepted sine of the principal angle between `l⁺` and `l⁻`.
    pub angle_min: f64,
    /// Plane agreement between successive horizons.
    pub doubling_tol: f64,
    /// Plane disagreement at `t_max` that counts as evidence against ED.
    pub no_ed_disagreement: f64,
    pub t0: f64,
    pub t_max: f64,
    pub integ_tol: f64,
    /// Smallest accepted singular value of the top block of `l⁺` for NC.
    pub nc_threshold: f64,
    pub seed: u64,
}

impl Default for EdThresholds {
    fn default() -> Self {
        EdThresholds {
            beta_min: 1e-3,
            angle_min: 1e-4,
            doubling_tol: 1e-6,
            no_ed_disagreement: 1e-3,
            t0: 8.0,
            t_max: 2048.0,
            integ_tol: 1e-10,
            nc_threshold: 1e-6,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointEvidence {
    pub omega: BasePoint,
    pub verdict: Verdict,
    /// Horizon of the last level examined.
    pub horizon: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub plane_defect_plus: f64,
    pub plane_defect_minus: f64,
    pub transversality: f64,
    pub eta: f64,
    pub l_plus: DMatrix<Complex64>,
    pub l_minus: DMatrix<Complex64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyReport {
    pub verdict: Verdict,
    pub beta_hat: f64,
    pub eta_hat: f64,
    pub points: Vec<PointEvidence>,
    pub thresholds: EdThresholds,
    pub samples: usize,
}

impl DichotomyReport {
    pub fn is_ed(&self) -> bool {
        self.verdict == Verdict::Ed
    }
}

/// Plane at time 0 of a generic frame started at `∓horizon`, with the
/// late-half growth rate of its slowest column.
fn plane_and_rate<T: Scalar>(
    field: &CoefficientField,
    omega: &BasePoint,
    z0: &DMatrix<T>,
    forward: bool,
    horizon: f64,
    tol: f64,
) -> Result<(DMatrix<T>, f64)> {
    let start = if forward { -horizon } else { horizon };
    let half = horizon / 2.0;
    // cumulative logs at the first step inside the late half, and its time
    let mut total = vec![0.0; z0.ncols()];
    let mut mark: Option<(f64, Vec<f64>)> = None;
    let nf = propagate_normalized(field, omega, start, z0, 0.0, tol, |t, _, logs| {
        for (acc, l) in total.iter_mut().zip(logs) {
            *acc += l;
        }
        if mark.is_none() && t.abs() <= half {
            mark = Some((t.abs(), total.clone()));
        }
        StepAction::Continue
    })?;
    let rate = match mark {
        Some((tc, at)) if tc > 0.0 => total.iter().zip(&at).map(|(e, s)| (e - s) / tc).fold(f64::INFINITY, f64::min),
        _ => 0.0,
    };
    Ok((nf.q, rate))
}

/// `max_t ‖Φ(t)|_l‖ e^{β t}` over `t ∈ [0, span]` (or `[-span, 0]`).
fn eta_estimate<T: Scalar>(field: &CoefficientField, omega: &BasePoint, q: &DMatrix<T>, forward: bool, beta: f64, span: f64, tol: f64) -> Result<f64> {
    let g = Generator::<T>::new(field, omega)?;
    let mut eta: f64 = 1.0;
    let end = if forward { span } else { -span };
    integrator(tol)?.integrate(
        |t, y| g.apply(t, y),
        0.0,
        q.clone(),
        end,
        |t, y| {
            eta = eta.max(linalg::spectral_norm(y) * (beta * t.abs()).exp());
            StepAction::Continue
        },
    )?;
    Ok(eta)
}

fn detect_point<T: Scalar>(field: &CoefficientField, omega: &BasePoint, th: &EdThresholds) -> Result<PointEvidence> {
    let n = field.n();
    let gen = linalg::generic_frame(2 * n, n, th.seed).map(T::from_real);
    let mut prev: Option<(DMatrix<T>, DMatrix<T>)> = None;
    let mut low_rate_levels = 0;
    let mut horizon = th.t0;
    let mut ev = PointEvidence {
        omega: omega.clone(),
        verdict: Verdict::Inconclusive,
        horizon,
        beta_plus: 0.0,
        beta_minus: 0.0,
        plane_defect_plus: f64::INFINITY,
        plane_defect_minus: f64::INFINITY,
        transversality: 0.0,
        eta: f64::INFINITY,
        l_plus: DMatrix::zeros(2 * n, n),
        l_minus: DMatrix::zeros(2 * n, n),
    };
    while horizon <= th.t_max * (1.0 + 1e-12) {
        let (qp, rp) = plane_and_rate(field, omega, &gen, false, horizon, th.integ_tol)?;
        let (qm, rm) = plane_and_rate(field, omega, &gen, true, horizon, th.integ_tol)?;
        ev.horizon = horizon;
        ev.beta_plus = rp;
        ev.beta_minus = rm;
        ev.transversality = linalg::transversality(&qp, &qm);
        ev.l_plus = linalg::to_complex(&qp);
        ev.l_minus = linalg::to_complex(&qm);
        let rate = rp.min(rm);
        if let Some((pp, pm)) = &prev {
            ev.plane_defect_plus = linalg::plane_distance(pp, &qp);
            ev.plane_defect_minus = linalg::plane_distance(pm, &qm);
            if ev.plane_defect_plus <= th.doubling_tol
                && ev.plane_defect_minus <= th.doubling_tol
                && rate >= th.beta_min
                && ev.transversality >= th.angle_min
            {
                ev.verdict = Verdict::Ed;
                let span = horizon.min(5.0 / rate);
                let ep = eta_estimate(field, omega, &qp, true, rate, span, th.integ_tol)?;
                let em = eta_estimate(field, omega, &qm, false, rate, span, th.integ_tol)?;
                ev.eta = ep.max(em);
                return Ok(ev);
            }
        }
        // non-normal transients mask slow rates on short horizons
        if rate < th.beta_min && horizon * th.beta_min >= 1.0 {
            low_rate_levels += 1;
            if low_rate_levels >= 2 {
                ev.verdict = Verdict::NoEd;
                return Ok(ev);
            }
        } else {
            low_rate_levels = 0;
        }
        prev = Some((qp, qm));
        horizon *= 2.0;
    }
    let disagreement = ev.plane_defect_plus.max(ev.plane_defect_minus);
    ev.verdict = if disagreement > th.no_ed_disagreement || ev.beta_plus.min(ev.beta_minus) < th.beta_min {
        Verdict::NoEd
    } else {
        Verdict::Inconclusive
    };
    Ok(ev)
}

/// Sampled dichotomy test: ED on the grid when every point passes, noED as
/// soon as one point fails.
pub fn detect_ed(field: &CoefficientField, grid: &[BasePoint], th: &EdThresholds) -> Result<DichotomyReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("detect_ed needs a nonempty grid".into()));
    }
    let points: Vec<PointEvidence> = grid
        .par_iter()
        .map(|w| if field.is_complex() { detect_point::<Complex64>(field, w, th) } else { detect_point::<f64>(field, w, th) })
        .collect::<Result<_>>()?;
    let verdict = if points.iter().all(|p| p.verdict == Verdict::Ed) {
        Verdict::Ed
    } else if points.iter().any(|p| p.verdict == Verdict::NoEd) {
        Verdict::NoEd
    } else {
        Verdict::Inconclusive
    };
    let beta_hat = points.iter().map(|p| p.beta_plus.min(p.beta_minus)).fold(f64::INFINITY, f64::min).max(0.0);
    let eta_hat = if verdict == Verdict::Ed { points.iter().map(|p| p.eta).fold(1.0, f64::max) } else { f64::INFINITY };
    Ok(DichotomyReport { verdict, beta_hat, eta_hat, samples: points.len(), points, thresholds: *th })
}

#[derive(Debug, Clone, Serialize)]
pub struct NcReport {
    pub holds: bool,
    pub min_sigma: f64,
    /// `M⁺(ω)` read off the `l⁺` frames, where the top block is invertible.
    pub m_plus: Vec<(BasePoint, DMatrix<Complex64>)>,
}

/// Nonoscillation on the sampled grid: the `l⁺` frames of an ED report have
/// invertible top blocks.
pub fn nonoscillation_check(report: &DichotomyReport) -> Result<NcReport> {
    if report.verdict != Verdict::Ed {
        return Err(Error::Hypothesis("nonoscillation check needs an ED report".into()));
    }
    let thr = report.thresholds.nc_threshold;
    let mut min_sigma = f64::INFINITY;
    let mut m_plus = Vec::new();
    for p in &report.points {
        let top = linalg::top_block(&p.l_plus);
        let s = linalg::min_singular(&top);
        min_sigma = min_sigma.min(s);
        if s >= thr {
            if let Some(m) = linalg::right_divide(&linalg::bottom_block(&p.l_plus), &top) {
                m_plus.push((p.omega.clone(), linalg::symmetrize(&m)));
            }
        }
    }
    Ok(NcReport { holds: min_sigma >= thr, min_sigma, m_plus })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UwdOptions {
    pub t_max: f64,
    /// `|det Q1|` of the orthonormal frame below this counts as degenerate.
    pub det_threshold: f64,
    pub profile_bins: usize,
    pub integ_tol: f64,
}

impl Default for UwdOptions {
    fn default() -> Self {
        UwdOptions { t_max: 200.0, det_threshold: 1e-10, profile_bins: 100, integ_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UwdReport {
    pub verdict: bool,
    /// Last sampled time at which some top block was degenerate.
    pub t0_hat: f64,
    /// `(bin end, min |det Q1|)` over the grid.
    pub min_det_profile: Vec<(f64, f64)>,
    pub h3_psd: bool,
    pub samples: usize,
}

fn uwd_point(field: &CoefficientField, omega: &BasePoint, opts: &UwdOptions) -> Result<(f64, Vec<f64>)> {
    let n = field.n();
    let z0 = linalg::stack(&DMatrix::<f64>::zeros(n, n), &DMatrix::identity(n, n));
    let bins = opts.profile_bins.max(1);
    let width = opts.t_max / bins as f64;
    let mut profile = vec![f64::INFINITY; bins];
    let mut last_bad: f64 = 0.0;
    let mut prev_det = 0.0_f64;
    propagate_normalized(field, omega, 0.0, &z0, opts.t_max, opts.integ_tol, |t, q, _| {
        let det = linalg::top_block(q).determinant();
        let bin = ((t / width) as usize).min(bins - 1);
        profile[bin] = profile[bin].min(det.abs());
        if det.abs() < opts.det_threshold || (prev_det != 0.0 && det.signum() != prev_det.signum()) {
            last_bad = t;
        }
        prev_det = det;
        StepAction::Continue
    })?;
    Ok((last_bad, profile))
}

/// Propagates `[[0],[I]]` forward; UWD when the top block stops degenerating
/// by `t_max / 2` at every grid point.
pub fn uwd_test(field: &CoefficientField, grid: &[BasePoint], opts: &UwdOptions) -> Result<UwdReport> {
    if field.is_complex() {
        return Err(Error::InvalidArgument("uwd_test needs a real field".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("uwd_test needs a nonempty grid".into()));
    }
    let per_point: Vec<(f64, Vec<f64>)> = grid.par_iter().map(|w| uwd_point(field, w, opts)).collect::<Result<_>>()?;
    let bins = opts.profile_bins.max(1);
    let width = opts.t_max / bins as f64;
    let mut profile = vec![f64::INFINITY; bins];
    let mut t0_hat: f64 = 0.0;
    for (t0, p) in &per_point {
        t0_hat = t0_hat.max(*t0);
        for (acc, v) in profile.iter_mut().zip(p) {
            *acc = acc.min(*v);
        }
    }
    let h3_psd = grid.iter().all(|w| linalg::min_eigenvalue(&field.h3::<f64>(w)) >= -1e-12);
    Ok(UwdReport {
        verdict: t0_hat <= opts.t_max / 2.0,
        t0_hat,
        min_det_profile: profile.into_iter().enumerate().map(|(i, v)| ((i + 1) as f64 * width, v)).collect(),
        h3_psd,
        samples: grid.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AtkinsonStatus {
    Satisfied,
    NotSatisfied,
    Undetermined,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AtkinsonOptions {
    pub horizon: f64,
    /// Smallest Gram eigenvalue counting as a satisfied integral condition.
    pub satisfied_tol: f64,
    /// Gram eigenvalues below `zero_tol · max(1, λ_max)` count as zero.
    pub zero_tol: f64,
    pub integ_tol: f64,
}

impl Default for AtkinsonOptions {
    fn default() -> Self {
        AtkinsonOptions { horizon: 8.0, satisfied_tol: 1e-6, zero_tol: 1e-10, integ_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AtkinsonReport {
    pub status: AtkinsonStatus,
    pub witness: Option<(BasePoint, DVector<Complex64>)>,
    /// Smallest eigenvalue of the Gram matrix at each grid point.
    pub min_eigenvalues: Vec<f64>,
}

/// `W = ∫_{-h}^{h} U(t)ᴴ P2ᵀ Δ(ω·t)² P2 U(t) dt`, integrated with `U` as one
/// augmented system.
fn atkinson_gram<T: Scalar>(field: &CoefficientField, omega: &BasePoint, opts: &AtkinsonOptions) -> Result<DMatrix<T>> {
    let n = field.n();
    let g = Generator::<T>::new(field, omega)?;
    let delta = field.delta().ok_or_else(|| Error::InvalidArgument("Atkinson check needs Delta".into()))?;
    let flow = field.flow();
    let rhs = |t: f64, y: &DMatrix<T>| {
        let u = y.rows(0, 2 * n).into_owned();
        let d = delta.eval(&flow.advance(omega, t)).map(T::from_real);
        let dz2 = &d * u.rows(n, n);
        let mut out = DMatrix::zeros(4 * n, 2 * n);
        out.rows_mut(0, 2 * n).copy_from(&g.apply(t, &u));
        out.rows_mut(2 * n, 2 * n).copy_from(&(dz2.adjoint() * &dz2));
        out
    };
    let mut y0 = DMatrix::<T>::zeros(4 * n, 2 * n);
    y0.rows_mut(0, 2 * n).fill_with_identity();
    let ode = integrator(opts.integ_tol)?;
    let fwd = ode.integrate(rhs, 0.0, y0.clone(), opts.horizon, |_, _| StepAction::Continue)?.y;
    let back = ode.integrate(rhs, 0.0, y0, -opts.horizon, |_, _| StepAction::Continue)?.y;
    let w = fwd.rows(2 * n, 2 * n) - back.rows(2 * n, 2 * n);
    Ok((&w + w.adjoint()).scale(0.5))
}

fn min_eigenpair(w: &DMatrix<Complex64>) -> (f64, f64, DVector<Complex64>) {
    let n = w.nrows();
    // embed the Hermitian matrix as a real symmetric one of twice the size
    let (re, im) = (linalg::real_part(w), linalg::imag_part(w));
    let big = linalg::block2(&re, &(-&im), &im, &re);
    let eig = big.symmetric_eigen();
    let (mut imin, mut vmax) = (0, f64::NEG_INFINITY);
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        vmax = vmax.max(eig.eigenvalues[i]);
    }
    let v = eig.eigenvectors.column(imin);
    let z = DVector::from_fn(n, |i, _| Complex64::new(v[i], v[n + i]));
    let norm = z.norm();
    (eig.eigenvalues[imin], vmax, z / Complex64::new(norm, 0.0))
}

/// Integral condition on the grid. The condition holds for the flow when it
/// holds at some sampled point; a witness is reported when every point has a
/// null direction.
pub fn atkinson_check(field: &CoefficientField, grid: &[BasePoint], opts: &AtkinsonOptions) -> Result<AtkinsonReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("atkinson_check needs a nonempty grid".into()));
    }
    let grams: Vec<DMatrix<Complex64>> = grid
        .par_iter()
        .map(|w| {
            if field.is_complex() {
                atkinson_gram::<Complex64>(field, w, opts)
            } else {
                atkinson_gram::<f64>(field, w, opts).map(|g| linalg::to_complex(&g))
            }
        })
        .collect::<Result<_>>()?;
    let mut min_eigenvalues = Vec::with_capacity(grid.len());
    let mut any_satisfied = false;
    let mut all_zero = true;
    let mut witness = None;
    for (w, g) in grid.iter().zip(&grams) {
        let (lmin, lmax, v) = min_eigenpair(g);
        min_eigenvalues.push(lmin);
        if lmin >= opts.satisfied_tol {
            any_satisfied = true;
        }
        if lmin <= opts.zero_tol * lmax.max(1.0) {
            if witness.is_none() {
                witness = Some((w.clone(), v));
            }
        } else {
            all_zero = false;
        }
    }
    let status = if any_satisfied {
        AtkinsonStatus::Satisfied
    } else if all_zero {
        AtkinsonStatus::NotSatisfied
    } else {
        AtkinsonStatus::Undetermined
    };
    if status != AtkinsonStatus::NotSatisfied {
        witness = None;
    }
    Ok(AtkinsonReport { status, witness, min_eigenvalues })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WitnessShape {
    Any,
    /// `(z1, 0)`: second block vanishes identically.
    UpperOnly,
    /// `(0, z2)`: first block vanishes identically.
    LowerOnly,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WitnessOptions {
    /// `sup ‖z(t)‖ / ‖z0‖` bound for a bounded witness.
    pub bound: f64,
    pub samples: usize,
    /// Relative Gram threshold for an identically vanishing block.
    pub zero_tol: f64,
    pub integ_tol: f64,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions { bound: 10.0, samples: 200, zero_tol: 1e-12, integ_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub omega: BasePoint,
    pub z0: DVector<Complex64>,
    pub sup_ratio: f64,
    pub sup_ratio_doubled: f64,
}

/// Solutions `U(t) V` at evenly spaced times in `[-T, T]`.
fn sampled_solutions<T: Scalar>(
    field: &CoefficientField,
    omega: &BasePoint,
    v: &DMatrix<T>,
    horizon: f64,
    samples: usize,
    tol: f64,
) -> Result<Vec<DMatrix<T>>> {
    let half = samples.max(2) / 2;
    let dt = horizon / half as f64;
    let mut out = vec![v.clone()];
    for dir in [1.0, -1.0] {
        let mut y = v.clone();
        for k in 0..half {
            y = solve(field, omega, dir * k as f64 * dt, y, dir * (k + 1) as f64 * dt, tol)?;
            out.push(y.clone());
        }
    }
    Ok(out)
}

fn gram<T: Scalar>(ys: &[DMatrix<T>], rows: Option<(usize, usize)>) -> DMatrix<Complex64> {
    let k = ys[0].ncols();
    let mut g = DMatrix::<Complex64>::zeros(k, k);
    for y in ys {
        let y = linalg::to_complex(y);
        let y = match rows {
            Some((r, c)) => y.rows(r, c).into_owned(),
            None => y,
        };
        g += y.adjoint() * &y;
    }
    g
}

fn sup_ratio<T: Scalar>(ys: &[DMatrix<T>], v: &DVector<Complex64>) -> f64 {
    ys.iter().map(|y| (linalg::to_complex(y) * v).norm()).fold(0.0, f64::max)
}

fn witness_upper<T: Scalar>(field: &CoefficientField, omega: &BasePoint, horizon: f64, any: bool, opts: &WitnessOptions) -> Result<Option<Witness>> {
    let n = field.n();
    let basis: DMatrix<T> = if any {
        DMatrix::identity(2 * n, 2 * n)
    } else {
        linalg::stack(&DMatrix::identity(n, n), &DMatrix::zeros(n, n))
    };
    let mut found = Vec::new();
    for h in [horizon, 2.0 * horizon] {
        let ys = sampled_solutions(field, omega, &basis, h, opts.samples, opts.integ_tol)?;
        let (v, ok) = if any {
            let (_, _, v) = min_eigenpair(&gram(&ys, None));
            (v, true)
        } else {
            let g2 = gram(&ys, Some((n, n)));
            let (lmin, _, v) = min_eigenpair(&g2);
            let scale = linalg::spectral_norm(&gram(&ys, None)).max(1.0);
            (v, lmin <= opts.zero_tol * scale)
        };
        let s = sup_ratio(&ys, &v);
        found.push((v, ok, s));
    }
    let (v, ok1, s1) = found[0].clone();
    let (_, ok2, s2) = found[1].clone();
    if ok1 && ok2 && s2 <= opts.bound && s2 <= 1.5 * s1 + 0.1 {
        let z0 = if any {
            v
        } else {
            DVector::from_fn(2 * n, |i, _| if i < n { v[i] } else { Complex64::new(0.0, 0.0) })
        };
        Ok(Some(Witness { omega: omega.clone(), z0, sup_ratio: s1, sup_ratio_doubled: s2 }))
    } else {
        Ok(None)
    }
}

/// Searches for a nonzero bounded solution on `[-2T, 2T]` by minimizing the
/// sampled Gram matrix over initial data, optionally restricted to a shape.
pub fn bounded_solution_witness(
    field: &CoefficientField,
    omega: &BasePoint,
    horizon: f64,
    shape: WitnessShape,
    opts: &WitnessOptions,
) -> Result<Option<Witness>> {
    let run = |f: &CoefficientField, any: bool| {
        if f.is_complex() {
            witness_upper::<Complex64>(f, omega, horizon, any, opts)
        } else {
            witness_upper::<f64>(f, omega, horizon, any, opts)
        }
    };
    match shape {
        WitnessShape::Any => run(field, true),
        WitnessShape::UpperOnly => run(field, false),
        WitnessShape::LowerOnly => {
            let n = field.n();
            Ok(run(&field.swap_variables(), false)?.map(|mut w| {
                let z = w.z0.clone();
                w.z0 = DVector::from_fn(2 * n, |i, _| if i < n { z[n + i] } else { z[i - n] });
                w
            }))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilyClass {
    O1,
    O2,
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeEvidence {
    pub lambda: Complex64,
    pub verdict: Verdict,
    pub witness: Option<DVector<Complex64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub class: FamilyClass,
    pub kind: FamilyKind,
    pub ed_at: Option<Complex64>,
    pub witness: Option<DVector<Complex64>>,
    pub probes: Vec<ProbeEvidence>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassifyOptions {
    pub witness_horizon: f64,
    /// `|⟨w_i, w_j⟩|` above which two unit witnesses count as the same direction.
    pub persistence: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { witness_horizon: 20.0, persistence: 1.0 - 1e-6 }
    }
}

pub fn default_probes() -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.5)]
}

/// Decides between the two alternatives for an H3- or H2-type family:
/// ED at some probe (O1), or a λ-independent bounded solution of the
/// form `(z1, 0)` resp. `(0, z2)` (O2).
pub fn classify_family(
    family: &Family,
    grid: &[BasePoint],
    probes: &[Complex64],
    th: &EdThresholds,
    opts: &ClassifyOptions,
) -> Result<ClassifyReport> {
    let delta = family.base.delta().ok_or_else(|| Error::InvalidArgument("classification needs Delta".into()))?;
    for w in grid {
        if linalg::min_eigenvalue(&delta.eval(w)) <= 0.0 {
            return Err(Error::Hypothesis("Delta is not positive definite on the grid".into()));
        }
    }
    let shape = match family.kind {
        FamilyKind::H3 => WitnessShape::UpperOnly,
        FamilyKind::H2 => WitnessShape::LowerOnly,
    };
    let omega = grid.first().ok_or_else(|| Error::InvalidArgument("classification needs a nonempty grid".into()))?;
    let mut evidence = Vec::with_capacity(probes.len());
    for &lambda in probes {
        let f = family.at(lambda);
        let verdict = detect_ed(&f, grid, th)?.verdict;
        let witness = if verdict == Verdict::Ed {
            None
        } else {
            bounded_solution_witness(&f, omega, opts.witness_horizon, shape, &WitnessOptions::default())?.map(|w| w.z0)
        };
        evidence.push(ProbeEvidence { lambda, verdict, witness });
    }
    if let Some(p) = evidence.iter().find(|p| p.verdict == Verdict::Ed) {
        return Ok(ClassifyReport { class: FamilyClass::O1, kind: family.kind, ed_at: Some(p.lambda), witness: None, probes: evidence });
    }
    let witnesses: Vec<&DVector<Complex64>> = evidence.iter().filter_map(|p| p.witness.as_ref()).collect();
    let persistent = !evidence.is_empty()
        && witnesses.len() == evidence.len()
        && witnesses.iter().all(|w| w.dotc(witnesses[0]).norm() >= opts.persistence);
    let (class, witness) = if persistent { (FamilyClass::O2, Some(witnesses[0].clone())) } else { (FamilyClass::Undetermined, None) };
    Ok(ClassifyReport { class, kind: family.kind, ed_at: None, witness, probes: evidence })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(h: &[f64]) -> CoefficientField {
        CoefficientField::from_matrix(&DMatrix::from_row_slice(2, 2, h), Some(DMatrix::identity(1, 1))).unwrap()
    }

    #[test]
    fn hyperbolic_has_ed() {
        let f = constant(&[-1.0, 0.0, 0.0, 1.0]);
        let r = detect_ed(&f, &[f.flow().origin()], &EdThresholds::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Ed);
        assert!((r.beta_hat - 1.0).abs() < 1e-3, "{}", r.beta_hat);
        let p = &r.points[0];
        assert!(p.l_plus[(1, 0)].norm() < 1e-6 && p.l_minus[(0, 0)].norm() < 1e-6);
    }

    #[test]
    fn rotation_has_no_ed() {
        let f = constant(&[0.0, 1.0, -1.0, 0.0]);
        let r = detect_ed(&f, &[f.flow().origin()], &EdThresholds::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NoEd);
    }

    #[test]
    fn uwd_closed_forms() {
        let f = constant(&[0.0, 1.0, 1.0, 0.0]);
        let r = uwd_test(&f, &[f.flow().origin()], &UwdOptions::default()).unwrap();
        assert!(r.verdict && r.t0_hat < 1e-3, "{}", r.t0_hat);
        let g = constant(&[0.0, 1.0, -1.0, 0.0]);
        let r = uwd_test(&g, &[g.flow().origin()], &UwdOptions::default()).unwrap();
        assert!(!r.verdict);
    }

    #[test]
    fn atkinson_cases() {
        let o = BasePoint::origin(0);
        let ok = atkinson_check(&constant(&[0.0, 1.0, 1.0, 0.0]), &[o.clone()], &AtkinsonOptions::default()).unwrap();
        assert_eq!(ok.status, AtkinsonStatus::Satisfied);
        let ab = atkinson_check(&constant(&[0.0, 1.0, 0.0, 0.0]), &[o.clone()], &AtkinsonOptions::default()).unwrap();
        assert_eq!(ab.status, AtkinsonStatus::NotSatisfied);
        let (_, v) = ab.witness.unwrap();
        assert!((v[0].norm() - 1.0).abs() < 1e-8 && v[1].norm() < 1e-8);
        let zero_delta = CoefficientField::constant(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            Some(DMatrix::zeros(1, 1)),
        )
        .unwrap();
        assert_eq!(atkinson_check(&zero_delta, &[o], &AtkinsonOptions::default()).unwrap().status, AtkinsonStatus::NotSatisfied);
    }

    #[test]
    fn witnesses() {
        let o = BasePoint::origin(0);
        let opts = WitnessOptions::default();
        assert!(bounded_solution_witness(&constant(&[-1.0, 0.0, 0.0, 1.0]), &o, 10.0, WitnessShape::Any, &opts).unwrap().is_none());
        assert!(bounded_solution_witness(&constant(&[0.0, 1.0, -1.0, 0.0]), &o, 10.0, WitnessShape::Any, &opts).unwrap().is_some());
        let w = bounded_solution_witness(&constant(&[0.0, 1.0, 0.0, 0.0]), &o, 10.0, WitnessShape::UpperOnly, &opts).unwrap().unwrap();
        assert!((w.z0[0].norm() - 1.0).abs() < 1e-12 && w.z0[1].norm() == 0.0);
    }
}
