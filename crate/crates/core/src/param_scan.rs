//! Parameter sweeps along perturbation families: the ED + NC interval and its
//! right end α*, the regularization threshold ρ(α), Weyl-function ordering,
//! and Herglotz / Stieltjes analysis of λ ↦ M±(ω, λ).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::base_flow::BasePoint;
use crate::dichotomy::{detect_ed, nonoscillation_check, uwd_test, EdThresholds, UwdOptions, Verdict};
use crate::error::{Error, Result};
use crate::hamiltonian::{CoefficientField, Family, FamilyKind};
use crate::linalg;
use crate::riccati_weyl::{extrapolate_to_zero, weyl_minus, weyl_plus, WeylOptions, WeylRole};
use crate::rotation::{rotation_profile, RotationProfile, DEFAULT_HORIZON};

/// Outcome of a three-valued bisection predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Pred {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanOptions {
    pub ed: EdThresholds,
    pub uwd: UwdOptions,
    pub weyl: WeylOptions,
    /// Bracket cap above which the answer is reported as +∞.
    pub cap: f64,
    pub alpha_tol: f64,
    /// Smallest ε tried by the ρ bisection.
    pub eps_lo: f64,
    pub eps_tol: f64,
    pub rotation_horizon: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            ed: EdThresholds::default(),
            uwd: UwdOptions::default(),
            weyl: WeylOptions::default(),
            cap: 1e3,
            alpha_tol: 2.5e-4,
            eps_lo: 1e-3,
            eps_tol: 1e-4,
            rotation_horizon: DEFAULT_HORIZON,
        }
    }
}

/// ED on the grid, retried once with a doubled horizon when inconclusive.
fn ed_verdict(field: &CoefficientField, grid: &[BasePoint], th: &EdThresholds) -> Result<(Verdict, crate::dichotomy::DichotomyReport)> {
    let r = detect_ed(field, grid, th)?;
    if r.verdict != Verdict::Inconclusive {
        return Ok((r.verdict, r));
    }
    let wider = EdThresholds { t_max: 2.0 * th.t_max, ..*th };
    let r = detect_ed(field, grid, &wider)?;
    Ok((r.verdict, r))
}

/// "ED and NC" on the grid.
pub fn ed_nc_predicate(field: &CoefficientField, grid: &[BasePoint], opts: &ScanOptions) -> Result<Pred> {
    let (v, report) = ed_verdict(field, grid, &opts.ed)?;
    Ok(match v {
        Verdict::Ed => {
            if nonoscillation_check(&report)?.holds {
                Pred::Pass
            } else {
                Pred::Fail
            }
        }
        Verdict::NoEd => Pred::Fail,
        Verdict::Inconclusive => Pred::Inconclusive,
    })
}

/// "ED and UWD" on the grid.
pub fn ed_uwd_predicate(field: &CoefficientField, grid: &[BasePoint], opts: &ScanOptions) -> Result<Pred> {
    let (v, _) = ed_verdict(field, grid, &opts.ed)?;
    Ok(match v {
        Verdict::Ed => {
            if uwd_test(field, grid, &opts.uwd)?.verdict {
                Pred::Pass
            } else {
                Pred::Fail
            }
        }
        Verdict::NoEd => Pred::Fail,
        Verdict::Inconclusive => Pred::Inconclusive,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Boundary {
    /// Right end of the passing set, `+∞` when the cap passes.
    pub value: f64,
    pub capped: bool,
    /// An inconclusive predicate was treated as a failure.
    pub flagged: bool,
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Finds the first failure of `pred` to the right of `lo` (where it must
/// pass): geometric expansion from `lo + step` up to `cap`, then bisection to
/// `tol`. Inconclusive answers count as failures and set the flag.
pub fn bisect_boundary<P>(mut pred: P, lo: f64, step: f64, cap: f64, tol: f64) -> Result<Boundary>
where
    P: FnMut(f64) -> Result<Pred>,
{
    let mut flagged = false;
    let mut evaluations = 0;
    let mut eval = |x: f64, flagged: &mut bool| -> Result<bool> {
        evaluations += 1;
        Ok(match pred(x)? {
            Pred::Pass => true,
            Pred::Fail => false,
            Pred::Inconclusive => {
                *flagged = true;
                false
            }
        })
    };
    let mut a = lo;
    let mut s = step;
    let b = loop {
        let x = (lo + s).min(cap);
        if !eval(x, &mut flagged)? {
            break x;
        }
        a = x;
        if x >= cap {
            drop(eval);
            return Ok(Boundary { value: f64::INFINITY, capped: true, flagged, bracket: (a, f64::INFINITY), evaluations });
        }
        s *= 2.0;
    };
    let mut b = b;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if eval(mid, &mut flagged)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    drop(eval);
    Ok(Boundary { value: 0.5 * (a + b), capped: false, flagged, bracket: (a, b), evaluations })
}

fn check_delta_pd(family: &Family, grid: &[BasePoint]) -> Result<()> {
    let delta = family.base.delta().ok_or_else(|| Error::InvalidArgument("family needs Delta".into()))?;
    for w in grid {
        if linalg::min_eigenvalue(&delta.eval(w)) <= 0.0 {
            return Err(Error::Hypothesis("Delta is not positive definite on the grid".into()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaStar {
    pub alpha_star: f64,
    pub boundary: Boundary,
    /// ED verdict of the family at the first failing bracket point.
    pub boundary_behavior: Option<Verdict>,
}

/// Right end α* of the interval `(−∞, α*)` on which the H2-type family has
/// ED and NC, starting from α = 0.
pub fn find_alpha_star(family: &Family, grid: &[BasePoint], opts: &ScanOptions) -> Result<AlphaStar> {
    if family.kind != FamilyKind::H2 {
        return Err(Error::InvalidArgument("α* is defined for the H2-type family".into()));
    }
    check_delta_pd(family, grid)?;
    if ed_nc_predicate(&family.at_real(0.0), grid, opts)? != Pred::Pass {
        return Err(Error::Hypothesis("the family at α = 0 lacks ED or NC".into()));
    }
    let boundary = bisect_boundary(|a| ed_nc_predicate(&family.at_real(a), grid, opts), 0.0, 1.0, opts.cap, opts.alpha_tol)?;
    let boundary_behavior = if boundary.capped { None } else { Some(ed_verdict(&family.at_real(boundary.bracket.1), grid, &opts.ed)?.0) };
    Ok(AlphaStar { alpha_star: boundary.value, boundary, boundary_behavior })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RhoRow {
    pub alpha: f64,
    /// `+∞` when the cap passes; 0 when even `eps_lo` fails.
    pub rho: f64,
    pub capped: bool,
    pub flagged: bool,
    pub below_resolution: bool,
}

/// ρ(α): the supremum of ε for which the regularized family has ED and is UWD.
pub fn rho_at(family: &Family, grid: &[BasePoint], alpha: f64, opts: &ScanOptions) -> Result<RhoRow> {
    let pred = |eps: f64| ed_uwd_predicate(&family.regularized(alpha, eps), grid, opts);
    if pred(opts.eps_lo)? != Pred::Pass {
        return Ok(RhoRow { alpha, rho: 0.0, capped: false, flagged: false, below_resolution: true });
    }
    let b = bisect_boundary(pred, opts.eps_lo, opts.eps_lo, opts.cap, opts.eps_tol)?;
    Ok(RhoRow { alpha, rho: b.value, capped: b.capped, flagged: b.flagged, below_resolution: false })
}

pub fn rho_curve(family: &Family, grid: &[BasePoint], alphas: &[f64], opts: &ScanOptions) -> Result<Vec<RhoRow>> {
    if family.kind != FamilyKind::H2 {
        return Err(Error::InvalidArgument("ρ is defined for the H2-type family".into()));
    }
    let mut rows: Vec<RhoRow> = alphas.par_iter().map(|&a| rho_at(family, grid, a, opts)).collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(rows)
}

/// ρ nonincreasing in α, up to `slack`.
pub fn rho_nonincreasing(rows: &[RhoRow], slack: f64) -> bool {
    rows.windows(2).all(|w| w[1].rho <= w[0].rho + slack || w[0].rho.is_infinite())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonotonicityCertificate {
    /// Smallest eigenvalue of `M⁺(ω, α₂) − M⁺(ω, α₁)` over the grid.
    pub min_eigenvalue: f64,
    pub pass: bool,
}

pub fn weyl_monotonicity_check(family: &Family, grid: &[BasePoint], a1: f64, a2: f64, wopts: &WeylOptions) -> Result<MonotonicityCertificate> {
    if a2 < a1 {
        return Err(Error::InvalidArgument("need α₁ ≤ α₂".into()));
    }
    let mins: Vec<f64> = grid
        .par_iter()
        .map(|w| {
            let m1 = weyl_plus(&family.at_real(a1), w, wopts)?.re();
            let m2 = weyl_plus(&family.at_real(a2), w, wopts)?.re();
            Ok(linalg::min_eigenvalue(&(m2 - m1)))
        })
        .collect::<Result<_>>()?;
    let min_eigenvalue = mins.into_iter().fold(f64::INFINITY, f64::min);
    Ok(MonotonicityCertificate { min_eigenvalue, pass: min_eigenvalue > -1e-7 })
}

#[derive(Debug, Clone, Serialize)]
pub struct HalflineRow {
    pub alpha: f64,
    pub ed: bool,
    pub nc: bool,
    /// Largest eigenvalue of `M⁺(ω, α)` over the grid.
    pub m_plus_max_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HalflineReport {
    pub alpha0: f64,
    pub rows: Vec<HalflineRow>,
    /// Smallest eigenvalue of `M⁺(α_{i+1}) − M⁺(α_i)` over sorted α's and grid.
    pub ordering_slack: f64,
    pub pass: bool,
}

/// ED, NC, `M⁺ ≺ 0` and ordering of `M⁺` on sampled α ≤ α₀, where
/// `H2 − α₀Δ ≻ 0`.
pub fn left_halfline_check(family: &Family, grid: &[BasePoint], alpha0: f64, alphas: &[f64], opts: &ScanOptions) -> Result<HalflineReport> {
    if family.kind != FamilyKind::H2 {
        return Err(Error::InvalidArgument("left half-line check is for the H2-type family".into()));
    }
    let f0 = family.at_real(alpha0);
    for w in grid {
        if linalg::min_eigenvalue(&f0.h2::<f64>(w)) <= 0.0 {
            return Err(Error::Hypothesis("H2 − α₀Δ is not positive definite on the grid".into()));
        }
    }
    let mut sorted: Vec<f64> = alphas.to_vec();
    if sorted.iter().any(|&a| a > alpha0) {
        return Err(Error::InvalidArgument("test α's must not exceed α₀".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let results: Vec<(HalflineRow, Vec<DMatrix<f64>>)> = sorted
        .par_iter()
        .map(|&alpha| {
            let f = family.at_real(alpha);
            let (v, report) = ed_verdict(&f, grid, &opts.ed)?;
            let ed = v == Verdict::Ed;
            let nc = ed && nonoscillation_check(&report)?.holds;
            let mut ms = Vec::with_capacity(grid.len());
            let mut top = f64::NEG_INFINITY;
            if nc {
                for w in grid {
                    let m = weyl_plus(&f, w, &opts.weyl.with_rate(report.beta_hat))?.re();
                    top = top.max(linalg::max_eigenvalue(&m));
                    ms.push(m);
                }
            }
            Ok((HalflineRow { alpha, ed, nc, m_plus_max_eigenvalue: top }, ms))
        })
        .collect::<Result<_>>()?;
    let mut slack = f64::INFINITY;
    for w in results.windows(2) {
        for (a, b) in w[0].1.iter().zip(&w[1].1) {
            slack = slack.min(linalg::min_eigenvalue(&(b - a)));
        }
    }
    let rows: Vec<HalflineRow> = results.into_iter().map(|(r, _)| r).collect();
    let pass = rows.iter().all(|r| r.ed && r.nc && r.m_plus_max_eigenvalue < 0.0) && slack >= -1e-7;
    Ok(HalflineReport { alpha0, rows, ordering_slack: slack, pass })
}

/// A function `λ ↦ G(λ)` on the upper half plane.
pub type Sampler<'a> = dyn Fn(Complex64) -> Result<DMatrix<Complex64>> + Sync + 'a;

/// `λ ↦ M±(ω, λ)` along a family. Inside a band the planes attract at a
/// rate comparable to `Im λ`, so the horizon cap grows like `64 / Im λ`.
pub fn weyl_sampler<'a>(family: &'a Family, omega: &'a BasePoint, role: WeylRole, wopts: WeylOptions) -> impl Fn(Complex64) -> Result<DMatrix<Complex64>> + Sync + 'a {
    move |lambda| {
        let f = family.at(lambda);
        let mut o = wopts;
        while lambda.im > 0.0 && o.t_max * lambda.im < 64.0 {
            o.t_max *= 2.0;
        }
        let w = match role {
            WeylRole::MMinus => weyl_minus(&f, omega, &o)?,
            _ => weyl_plus(&f, omega, &o)?,
        };
        Ok(w.m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StieltjesOptions {
    pub betas: Vec<f64>,
    /// Absolute quadrature tolerance per β.
    pub quad_tol: f64,
    pub max_depth: usize,
    /// Largest accepted disagreement between the last two extrapolants.
    pub divergence_tol: f64,
    /// Smallest accepted eigenvalue of `Im G`.
    pub sign_tol: f64,
}

impl Default for StieltjesOptions {
    fn default() -> Self {
        StieltjesOptions { betas: vec![0.1, 0.05, 0.025, 0.0125, 0.00625], quad_tol: 1e-6, max_depth: 16, divergence_tol: 2e-2, sign_tol: 1e-8 }
    }
}

#[rustfmt::skip]
const XGK: [f64; 8] = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926, 0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961, 0.207784955007898467600689403773245, 0.0];
#[rustfmt::skip]
const WGK: [f64; 8] = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518, 0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014, 0.204432940075298892414161999234649, 0.209482141084727828012999174891714];
#[rustfmt::skip]
const WG: [f64; 4] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975, 0.417959183673469387755102040816327];

fn kronrod<F>(f: &F, a: f64, b: f64) -> Result<(DMatrix<f64>, f64)>
where
    F: Fn(f64) -> Result<DMatrix<f64>> + Sync,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let nodes: Vec<f64> = (0..15).map(|i| if i < 7 { c - h * XGK[i] } else if i == 7 { c } else { c + h * XGK[14 - i] }).collect();
    let vals: Vec<DMatrix<f64>> = nodes.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let weight_k = |i: usize| if i < 7 { WGK[i] } else if i == 7 { WGK[7] } else { WGK[14 - i] };
    let mut k = vals[7].scale(WGK[7]);
    let mut g = vals[7].scale(WG[3]);
    for (i, v) in vals.iter().enumerate() {
        if i == 7 {
            continue;
        }
        k += v.scale(weight_k(i));
        let j = if i < 7 { i } else { 14 - i };
        if j % 2 == 1 {
            g += v.scale(WG[j / 2]);
        }
    }
    let k = k.scale(h);
    let g = g.scale(h);
    let err = linalg::max_abs(&(&k - g));
    Ok((k, err))
}

fn adaptive<F>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> Result<DMatrix<f64>> + Sync,
{
    let (v, err) = kronrod(f, a, b)?;
    if err <= tol || depth == 0 {
        return Ok(v);
    }
    let m = 0.5 * (a + b);
    let (l, r) = rayon::join(|| adaptive(f, a, m, tol / 2.0, depth - 1), || adaptive(f, m, b, tol / 2.0, depth - 1));
    Ok(l? + r?)
}

/// `∫_a^b f` by adaptive Gauss–Kronrod 7/15.
pub fn integrate_matrix<F>(f: &F, a: f64, b: f64, tol: f64, max_depth: usize) -> Result<DMatrix<f64>>
where
    F: Fn(f64) -> Result<DMatrix<f64>> + Sync,
{
    adaptive(f, a, b, tol, max_depth)
}

fn checked_im(g: &DMatrix<Complex64>, sign_tol: f64) -> Result<DMatrix<f64>> {
    let im = linalg::symmetrize(&linalg::imag_part(g));
    let min_eig = linalg::min_eigenvalue(&im);
    if min_eig < -sign_tol * linalg::max_abs(g).max(1.0) {
        return Err(Error::SignViolation { min_eig });
    }
    Ok(im)
}

#[derive(Debug, Clone, Serialize)]
pub struct StieltjesResult {
    pub alpha1: f64,
    pub alpha2: f64,
    /// `½(P{α₁} + P{α₂}) + P((α₁, α₂))`.
    pub mass: DMatrix<f64>,
    pub atom_left: DMatrix<f64>,
    pub atom_right: DMatrix<f64>,
    /// `P((α₁, α₂))`.
    pub open_mass: DMatrix<f64>,
    pub per_beta: Vec<(f64, DMatrix<f64>)>,
    pub extrapolation_defect: f64,
}

fn extrapolate_real(xs: &[f64], ys: &[DMatrix<f64>], tol: f64) -> Result<(DMatrix<f64>, f64)> {
    let cs: Vec<DMatrix<Complex64>> = ys.iter().map(linalg::to_complex).collect();
    let all = linalg::real_part(&extrapolate_to_zero(xs, &cs));
    let fewer = linalg::real_part(&extrapolate_to_zero(&xs[..xs.len() - 1], &cs[..cs.len() - 1]));
    let defect = linalg::max_abs(&(&all - fewer));
    if defect > tol * linalg::max_abs(&all).max(1.0) {
        return Err(Error::DivergentLimit { defect });
    }
    Ok((all, defect))
}

/// Stieltjes inversion: `(1/π) lim_{β↓0} ∫_{α₁}^{α₂} Im G(α + iβ) dα`, with
/// endpoint atoms `lim β Im G(α + iβ)`.
pub fn stieltjes_invert(sampler: &Sampler, a1: f64, a2: f64, opts: &StieltjesOptions) -> Result<StieltjesResult> {
    if a1 >= a2 {
        return Err(Error::InvalidArgument("need α₁ < α₂".into()));
    }
    if opts.betas.len() < 2 {
        return Err(Error::InvalidArgument("need at least two β levels".into()));
    }
    let mut per_beta = Vec::with_capacity(opts.betas.len());
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &beta in &opts.betas {
        let f = |alpha: f64| checked_im(&sampler(Complex64::new(alpha, beta))?, opts.sign_tol);
        let m = integrate_matrix(&f, a1, a2, opts.quad_tol, opts.max_depth)?.scale(1.0 / std::f64::consts::PI);
        per_beta.push((beta, m));
        left.push(f(a1)?.scale(beta));
        right.push(f(a2)?.scale(beta));
    }
    let (mass, defect) = extrapolate_real(&opts.betas, &per_beta.iter().map(|(_, m)| m.clone()).collect::<Vec<_>>(), opts.divergence_tol)?;
    let (atom_left, _) = extrapolate_real(&opts.betas, &left, opts.divergence_tol.max(1e-1))?;
    let (atom_right, _) = extrapolate_real(&opts.betas, &right, opts.divergence_tol.max(1e-1))?;
    let open_mass = &mass - (&atom_left + &atom_right).scale(0.5);
    Ok(StieltjesResult { alpha1: a1, alpha2: a2, mass, atom_left, atom_right, open_mass, per_beta, extrapolation_defect: defect })
}

#[derive(Debug, Clone, Serialize)]
pub struct HerglotzData {
    #[serde(rename = "L")]
    pub l: DMatrix<f64>,
    #[serde(rename = "K")]
    pub k: DMatrix<f64>,
    pub measure_samples: Vec<StieltjesResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HerglotzOptions {
    /// Increasing β's used to extrapolate `G(iβ)/(iβ)`.
    pub k_betas: Vec<f64>,
    pub stieltjes: StieltjesOptions,
}

impl Default for HerglotzOptions {
    fn default() -> Self {
        HerglotzOptions { k_betas: vec![16.0, 64.0, 256.0, 1024.0, 4096.0], stieltjes: StieltjesOptions::default() }
    }
}

/// `L = Re G(i)`, `K = lim G(iβ)/(iβ)` and measure masses on the windows.
pub fn herglotz_fit(sampler: &Sampler, windows: &[(f64, f64)], opts: &HerglotzOptions) -> Result<HerglotzData> {
    let gi = sampler(Complex64::new(0.0, 1.0))?;
    checked_im(&gi, opts.stieltjes.sign_tol)?;
    let l = linalg::symmetrize(&linalg::real_part(&gi));
    let mut ratios = Vec::with_capacity(opts.k_betas.len());
    for &b in &opts.k_betas {
        let g = sampler(Complex64::new(0.0, b))?;
        checked_im(&g, opts.stieltjes.sign_tol)?;
        ratios.push(g / Complex64::new(0.0, b));
    }
    // powers of β^{-1/2} also cover square-root band edges
    let xs: Vec<f64> = opts.k_betas.iter().map(|b| 1.0 / b.sqrt()).collect();
    let k = linalg::symmetrize(&linalg::real_part(&extrapolate_to_zero(&xs, &ratios)));
    let measure_samples = windows.iter().map(|&(a, b)| stieltjes_invert(sampler, a, b, &opts.stieltjes)).collect::<Result<_>>()?;
    Ok(HerglotzData { l, k, measure_samples })
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakStarReport {
    pub masses: Vec<f64>,
    pub limit_mass: f64,
    pub defects: Vec<f64>,
    /// Largest defect over the second half of the sequence.
    pub tail_defect: f64,
}

/// Masses of a window under a sequence of Herglotz functions, against the limit.
pub fn weakstar_convergence_check(sequence: &[&Sampler], limit: &Sampler, window: (f64, f64), opts: &StieltjesOptions) -> Result<WeakStarReport> {
    let trace = |s: &Sampler| -> Result<f64> { Ok(stieltjes_invert(s, window.0, window.1, opts)?.mass.trace()) };
    let limit_mass = trace(limit)?;
    let masses: Vec<f64> = sequence.iter().map(|s| trace(s)).collect::<Result<_>>()?;
    let defects: Vec<f64> = masses.iter().map(|m| (m - limit_mass).abs()).collect();
    let tail_defect = defects[defects.len() / 2..].iter().copied().fold(0.0, f64::max);
    Ok(WeakStarReport { masses, limit_mass, defects, tail_defect })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub alpha_star: AlphaStar,
    pub rho_table: Vec<RhoRow>,
    pub monotonicity_certificate: Option<MonotonicityCertificate>,
    /// Rotation numbers at the first grid point over the scanned α's.
    pub rotation_profile: Option<RotationProfile>,
    pub herglotz: Option<HerglotzData>,
}

impl ScanResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,rho,verdict\n");
        for r in &self.rho_table {
            let verdict = if r.capped {
                "capped"
            } else if r.flagged {
                "flagged"
            } else if r.below_resolution {
                "below_resolution"
            } else {
                "ok"
            };
            s.push_str(&format!("{},{},{}\n", crate::fmt_num(r.alpha), crate::fmt_num(r.rho), verdict));
        }
        s
    }
}

/// α*, ρ and rotation numbers on `alphas`, and the Weyl ordering between the
/// smallest and largest scanned α inside the ED + NC interval.
pub fn scan(family: &Family, grid: &[BasePoint], alphas: &[f64], opts: &ScanOptions) -> Result<ScanResult> {
    let alpha_star = find_alpha_star(family, grid, opts)?;
    let rho_table = rho_curve(family, grid, alphas, opts)?;
    let inside: Vec<f64> = alphas.iter().copied().filter(|&a| a < alpha_star.boundary.bracket.0).collect();
    let monotonicity_certificate = match (inside.iter().copied().reduce(f64::min), inside.iter().copied().reduce(f64::max)) {
        (Some(lo), Some(hi)) if hi > lo => Some(weyl_monotonicity_check(family, grid, lo, hi, &opts.weyl)?),
        _ => None,
    };
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rotation_profile = match grid.first() {
        Some(w) if !sorted.is_empty() => Some(rotation_profile(family, w, &sorted, opts.rotation_horizon, opts.ed.integ_tol)?),
        _ => None,
    };
    Ok(ScanResult { alpha_star, rho_table, monotonicity_certificate, rotation_profile, herglotz: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_integrates_polynomials_and_peaks() {
        let f = |x: f64| Ok(DMatrix::from_element(1, 1, x * x * x - x));
        let v = integrate_matrix(&f, 0.0, 2.0, 1e-12, 10).unwrap();
        assert!((v[(0, 0)] - 2.0).abs() < 1e-12);
        let b = 0.01;
        let g = |x: f64| Ok(DMatrix::from_element(1, 1, b / (x * x + b * b)));
        let v = integrate_matrix(&g, -1.0, 1.0, 1e-10, 30).unwrap();
        assert!((v[(0, 0)] - 2.0 * (1.0 / b).atan()).abs() < 1e-8);
    }

    #[test]
    fn bisection_finds_threshold() {
        let b = bisect_boundary(|x| Ok(if x < 1.3 { Pred::Pass } else { Pred::Fail }), 0.0, 1.0, 1e3, 1e-6).unwrap();
        assert!((b.value - 1.3).abs() < 1e-6 && !b.capped && !b.flagged);
        let c = bisect_boundary(|_| Ok(Pred::Pass), 0.0, 1.0, 1e3, 1e-6).unwrap();
        assert!(c.capped && c.value.is_infinite());
    }

    #[test]
    fn delta_zero_has_unit_mass() {
        let g = |l: Complex64| Ok(DMatrix::from_element(1, 1, -Complex64::new(1.0, 0.0) / l));
        let r = stieltjes_invert(&g, -0.5, 0.5, &StieltjesOptions::default()).unwrap();
        assert!((r.mass[(0, 0)] - 1.0).abs() < 1e-3, "{}", r.mass);
    }
}
