//! Infinite-horizon linear-quadratic control over a base flow: the
//! Hamiltonian built from the control data, the ED + NC solvability test and
//! feedback synthesis through `M⁺`.
//!
//! For `x' = A x + B u` and supply rate
//! `Q = ½ (xᵀG x + 2 xᵀg u + uᵀR u)` the Hamiltonian has blocks
//! `H1 = A − BR⁻¹gᵀ`, `H3 = BR⁻¹Bᵀ`, `H2 = G − gR⁻¹gᵀ`, and the optimal pair is
//! `û = R⁻¹(Bᵀŷ − gᵀx̂)` with `ŷ = M⁺(ω·t) x̂`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_flow::{make_flow, BaseFlow, BasePoint, FlowDescriptor};
use crate::dichotomy::{detect_ed, nonoscillation_check, DichotomyReport, EdThresholds, NcReport, Verdict};
use crate::error::{Error, Result};
use crate::hamiltonian::{CoefficientField, DeclaredFlags};
use crate::linalg;
use crate::ode::StepAction;
use crate::propagator::integrator;
use crate::riccati_weyl::{weyl_plus, WeylOptions};
use crate::trig::{TrigJson, TrigMatrix};

#[derive(Debug, Clone)]
pub struct LQProblem {
    pub n: usize,
    pub m: usize,
    pub flow: BaseFlow,
    pub a: TrigMatrix,
    pub b: TrigMatrix,
    /// State weight `G`.
    pub g_state: TrigMatrix,
    /// Cross weight `g`.
    pub g_cross: TrigMatrix,
    /// Control weight; constant so that `R⁻¹` stays a trigonometric polynomial.
    pub r: DMatrix<f64>,
    pub x0: DVector<f64>,
}

/// `{"A":…, "B":…, "G":…, "g":…, "R":…, "x0":…}` with optional `n`, `m`, `flow`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LQProblemJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowDescriptor>,
    #[serde(rename = "A")]
    pub a: TrigJson,
    #[serde(rename = "B")]
    pub b: TrigJson,
    #[serde(rename = "G")]
    pub g_state: TrigJson,
    #[serde(rename = "g", default, skip_serializing_if = "Option::is_none")]
    pub g_cross: Option<TrigJson>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
}

fn constant_shape(j: &TrigJson) -> Option<(usize, usize)> {
    match j {
        TrigJson::Constant(rows) => Some((rows.len(), rows.first().map_or(0, |r| r.len()))),
        TrigJson::Table(_) => None,
    }
}

impl LQProblem {
    pub fn new(
        flow: BaseFlow,
        a: TrigMatrix,
        b: TrigMatrix,
        g_state: TrigMatrix,
        g_cross: Option<TrigMatrix>,
        r: DMatrix<f64>,
        x0: DVector<f64>,
    ) -> Result<Self> {
        let (n, m) = b.shape();
        let d = flow.dim();
        let g_cross = g_cross.unwrap_or_else(|| TrigMatrix::zeros(n, m, d));
        let shapes = [("A", a.shape(), (n, n)), ("G", g_state.shape(), (n, n)), ("g", g_cross.shape(), (n, m)), ("R", r.shape(), (m, m))];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::InvalidCoefficients(format!("{name} has shape {got:?}, expected {want:?}")));
            }
        }
        if x0.len() != n {
            return Err(Error::InvalidCoefficients(format!("x0 has length {}, expected {n}", x0.len())));
        }
        for (name, t) in [("A", &a), ("B", &b), ("G", &g_state), ("g", &g_cross)] {
            if t.torus_dim() != d {
                return Err(Error::InvalidCoefficients(format!("{name} is a table over a {}-torus, flow has dimension {d}", t.torus_dim())));
            }
        }
        if linalg::symmetry_defect(&r) > 1e-12 {
            return Err(Error::InvalidCoefficients("R is not symmetric".into()));
        }
        let p = LQProblem { n, m, flow, a, b, g_state, g_cross, r, x0 };
        for w in p.flow.grid(64, 0.7548776662466927) {
            if linalg::symmetry_defect(&p.g_state.eval(&w)) > 1e-12 {
                return Err(Error::InvalidCoefficients("G is not symmetric".into()));
            }
        }
        Ok(p)
    }

    /// Autonomous problem with constant data.
    pub fn constant(a: DMatrix<f64>, b: DMatrix<f64>, g_state: DMatrix<f64>, g_cross: Option<DMatrix<f64>>, r: DMatrix<f64>, x0: DVector<f64>) -> Result<Self> {
        let c = |m: DMatrix<f64>| TrigMatrix::constant(m, 0);
        Self::new(BaseFlow::autonomous(), c(a), c(b), c(g_state), g_cross.map(c), r, x0)
    }

    pub fn from_json(j: &LQProblemJson) -> Result<Self> {
        let flow = make_flow(j.flow.as_ref().unwrap_or(&FlowDescriptor::Autonomous))?;
        let (n, m) = match (j.n, j.m, constant_shape(&j.b)) {
            (Some(n), Some(m), _) => (n, m),
            (_, _, Some(s)) => s,
            _ => return Err(Error::Schema("n and m are required when B is a trig table".into())),
        };
        let d = flow.dim();
        let a = TrigMatrix::from_json(&j.a, n, n, d)?;
        let b = TrigMatrix::from_json(&j.b, n, m, d)?;
        let g_state = TrigMatrix::from_json(&j.g_state, n, n, d)?;
        let g_cross = j.g_cross.as_ref().map(|g| TrigMatrix::from_json(g, n, m, d)).transpose()?;
        let r = crate::trig::matrix_from_rows(&j.r, m, m)?;
        Self::new(flow, a, b, g_state, g_cross, r, DVector::from_vec(j.x0.clone()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: LQProblemJson = serde_json::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_json(&j)
    }

    /// `ρ`: the smallest eigenvalue of `R`.
    pub fn r_floor(&self) -> f64 {
        linalg::min_eigenvalue(&self.r)
    }

    fn r_inv(&self) -> Result<DMatrix<f64>> {
        if self.r_floor() <= 0.0 {
            return Err(Error::SingularR);
        }
        self.r.clone().try_inverse().ok_or(Error::SingularR)
    }

    /// Feedback gain `K(ω) = R⁻¹(BᵀM − gᵀ)` for a given `M`.
    pub fn gain(&self, omega: &BasePoint, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.r_inv()? * (self.b.eval(omega).transpose() * m - self.g_cross.eval(omega).transpose()))
    }

    /// Supply rate `Q(ω, x, u)`.
    pub fn supply_rate(&self, omega: &BasePoint, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let gx = self.g_state.eval(omega) * x;
        let gu = self.g_cross.eval(omega) * u;
        let ru = &self.r * u;
        0.5 * (x.dot(&gx) + 2.0 * x.dot(&gu) + u.dot(&ru))
    }
}

pub fn build_hamiltonian(p: &LQProblem) -> Result<CoefficientField> {
    let d = p.flow.dim();
    let r_inv = TrigMatrix::constant(p.r_inv()?, d);
    let bt = p.b.transpose();
    let gt = p.g_cross.transpose();
    let h1 = p.a.add(&p.b.mul(&r_inv)?.mul(&gt)?.scale(-1.0));
    let h3 = p.b.mul(&r_inv)?.mul(&bt)?;
    let h2 = p.g_state.add(&p.g_cross.mul(&r_inv)?.mul(&gt)?.scale(-1.0));
    let field = CoefficientField::new(p.flow.clone(), h1, h2, h3, None, DeclaredFlags { h3_psd: true, ..Default::default() })?;
    Ok(field)
}

#[derive(Debug, Clone, Serialize)]
pub struct Solvability {
    /// `None` when ED detection was inconclusive.
    pub solvable: Option<bool>,
    pub ed: DichotomyReport,
    pub nc: Option<NcReport>,
}

/// Sufficient condition: ED (frequency condition) and NC of the Hamiltonian.
pub fn solvability_check(p: &LQProblem, grid: &[BasePoint], th: &EdThresholds) -> Result<Solvability> {
    let field = build_hamiltonian(p)?;
    let ed = detect_ed(&field, grid, th)?;
    match ed.verdict {
        Verdict::Ed => {
            let nc = nonoscillation_check(&ed)?;
            Ok(Solvability { solvable: Some(nc.holds), ed, nc: Some(nc) })
        }
        Verdict::NoEd => Ok(Solvability { solvable: Some(false), ed, nc: None }),
        Verdict::Inconclusive => Ok(Solvability { solvable: None, ed, nc: None }),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisOptions {
    pub t_report: f64,
    pub samples: usize,
    /// Length of the stretches between re-projections onto `y = M⁺ x`.
    pub segment: f64,
    pub tol: f64,
    pub ed: EdThresholds,
    pub weyl: WeylOptions,
    pub grid_count: usize,
    pub grid_dt: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            t_report: 20.0,
            samples: 200,
            segment: 1.0,
            tol: 1e-11,
            ed: EdThresholds::default(),
            weyl: WeylOptions::default(),
            grid_count: 16,
            grid_dt: 0.7548776662466927,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LQSolution {
    pub feasible: bool,
    pub omega: BasePoint,
    /// `M⁺` at the segment starts `ω·t_k`.
    pub m_plus: Vec<(f64, DMatrix<f64>)>,
    pub trajectory: Vec<TrajectorySample>,
    /// `∫₀^T Q` along the synthesized pair.
    pub value: f64,
    /// `−½ x̂(T)ᵀ M⁺(ω·T) x̂(T)`, the optimal cost of the remaining tail.
    pub tail_estimate: f64,
    /// `C e^{−2β̂T}` bound on the neglected tail.
    pub truncation_bound: f64,
    pub beta_hat: f64,
    pub eta_hat: f64,
    /// Largest `‖R û − Bᵀŷ + gᵀx̂‖` over the samples.
    pub feedback_defect: f64,
    /// Largest `‖ŷ − M⁺x̂‖` at segment ends before re-projection.
    pub graph_defect: f64,
    /// Largest `‖x̂(t)‖ e^{β̂t} / ‖x0‖` over the samples.
    pub decay_ratio: f64,
    pub decay_ok: bool,
}

impl LQSolution {
    pub fn to_csv(&self) -> String {
        let Some(first) = self.trajectory.first() else {
            return String::from("t,Q\n");
        };
        let mut s = String::from("t");
        for (name, len) in [("x", first.x.len()), ("y", first.y.len()), ("u", first.u.len())] {
            for i in 0..len {
                s.push_str(&format!(",{name}{}", i + 1));
            }
        }
        s.push_str(",Q\n");
        for r in &self.trajectory {
            s.push_str(&crate::fmt_num(r.t));
            for v in r.x.iter().chain(&r.y).chain(&r.u) {
                s.push_str(&format!(",{}", crate::fmt_num(*v)));
            }
            s.push_str(&format!(",{}\n", crate::fmt_num(r.q)));
        }
        s
    }

    /// Sampled value plus the tail estimate.
    pub fn total_value(&self) -> f64 {
        self.value + self.tail_estimate
    }
}

/// Real `M⁺(ω)`, from a Weyl limit.
pub fn m_plus_at(field: &CoefficientField, omega: &BasePoint, wopts: &WeylOptions) -> Result<DMatrix<f64>> {
    Ok(linalg::symmetrize(&weyl_plus(field, omega, wopts)?.re()))
}

/// Integrates `x' = A x + B u`, `J' = Q` from `x0` to `t_end` under a
/// control given in feedback or open-loop form.
pub fn cost_of_control<U>(p: &LQProblem, omega: &BasePoint, x0: &DVector<f64>, control: U, t_end: f64, tol: f64) -> Result<(f64, DVector<f64>)>
where
    U: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let n = p.n;
    let rhs = |t: f64, s: &DMatrix<f64>| {
        let w = p.flow.advance(omega, t);
        let x = DVector::from_iterator(n, s.iter().take(n).copied());
        let u = control(t, &x);
        let dx = p.a.eval(&w) * &x + p.b.eval(&w) * &u;
        let q = p.supply_rate(&w, &x, &u);
        DMatrix::from_iterator(n + 1, 1, dx.iter().copied().chain(std::iter::once(q)))
    };
    let y0 = DMatrix::from_iterator(n + 1, 1, x0.iter().copied().chain(std::iter::once(0.0)));
    let sol = integrator(tol)?.integrate(rhs, 0.0, y0, t_end, |_, _| StepAction::Continue)?;
    let x = DVector::from_iterator(n, sol.y.iter().take(n).copied());
    Ok((sol.y[(n, 0)], x))
}

/// Optimal pair from `[[x0],[M⁺(ω)x0]]`, integrated in segments that are
/// re-projected onto the graph of `M⁺` to hold off the unstable directions.
pub fn synthesize(p: &LQProblem, omega: &BasePoint, opts: &SynthesisOptions) -> Result<LQSolution> {
    if !(opts.t_report > 0.0 && opts.segment > 0.0 && opts.samples >= 1) {
        return Err(Error::InvalidArgument("t_report, segment and samples must be positive".into()));
    }
    let field = build_hamiltonian(p)?;
    let grid = {
        let mut g = p.flow.grid(opts.grid_count, opts.grid_dt);
        if !g.contains(omega) {
            g.push(omega.clone());
        }
        g
    };
    let ed = detect_ed(&field, &grid, &opts.ed)?;
    let solvable = match ed.verdict {
        Verdict::Ed => nonoscillation_check(&ed)?.holds,
        Verdict::NoEd => false,
        Verdict::Inconclusive => return Err(Error::NotSolvable("ED detection was inconclusive".into())),
    };
    if !solvable {
        return Err(Error::NotSolvable(format!("ED {:?}, NC failed or absent", ed.verdict)));
    }
    let n = p.n;
    let beta = ed.beta_hat;
    let wopts = opts.weyl.with_rate(beta);
    let segments = (opts.t_report / opts.segment).ceil() as usize;
    let starts: Vec<f64> = (0..=segments).map(|k| (k as f64 * opts.segment).min(opts.t_report)).collect();
    let m_plus: Vec<(f64, DMatrix<f64>)> = if p.flow.is_autonomous() {
        let m = m_plus_at(&field, omega, &wopts)?;
        starts.iter().map(|&t| (t, m.clone())).collect()
    } else {
        starts
            .par_iter()
            .map(|&t| Ok((t, m_plus_at(&field, &p.flow.advance(omega, t), &wopts)?)))
            .collect::<Result<_>>()?
    };
    let sample_dt = opts.t_report / opts.samples as f64;
    let sample_times: Vec<f64> = (0..=opts.samples).map(|i| i as f64 * sample_dt).collect();
    let r_inv = p.r_inv()?;
    let integ = integrator(opts.tol)?;
    let mut trajectory = Vec::with_capacity(sample_times.len());
    let mut value = 0.0;
    let mut graph_defect: f64 = 0.0;
    let mut feedback_defect: f64 = 0.0;
    let mut x = p.x0.clone();
    let mut next_sample = 0usize;
    let sample = |t: f64, x: &DVector<f64>, y: &DVector<f64>| -> (TrajectorySample, f64) {
        let w = p.flow.advance(omega, t);
        let rhs = p.b.eval(&w).transpose() * y - p.g_cross.eval(&w).transpose() * x;
        let u = &r_inv * &rhs;
        let defect = (&p.r * &u - rhs).norm();
        let q = p.supply_rate(&w, x, &u);
        (TrajectorySample { t, x: x.iter().copied().collect(), y: y.iter().copied().collect(), u: u.iter().copied().collect(), q }, defect)
    };
    for k in 0..segments {
        let (t0, m0) = (&m_plus[k].0, &m_plus[k].1);
        let t1 = m_plus[k + 1].0;
        let y = m0 * &x;
        let mut state = DMatrix::from_iterator(2 * n + 1, 1, x.iter().chain(y.iter()).copied().chain(std::iter::once(0.0)));
        let mut t = *t0;
        while next_sample < sample_times.len() && sample_times[next_sample] <= t1 + 1e-12 {
            let ts = sample_times[next_sample].min(t1);
            if ts > t {
                state = integ.integrate(|s, z| segment_rhs(p, &field, omega, s, z, &r_inv), t, state, ts, |_, _| StepAction::Continue)?.y;
                t = ts;
            }
            let xs = DVector::from_iterator(n, state.iter().take(n).copied());
            let ys = DVector::from_iterator(n, state.iter().skip(n).take(n).copied());
            let (row, defect) = sample(ts, &xs, &ys);
            feedback_defect = feedback_defect.max(defect);
            trajectory.push(row);
            next_sample += 1;
        }
        if t1 > t {
            state = integ.integrate(|s, z| segment_rhs(p, &field, omega, s, z, &r_inv), t, state, t1, |_, _| StepAction::Continue)?.y;
        }
        value += state[(2 * n, 0)];
        x = DVector::from_iterator(n, state.iter().take(n).copied());
        let y_end = DVector::from_iterator(n, state.iter().skip(n).take(n).copied());
        graph_defect = graph_defect.max((y_end - &m_plus[k + 1].1 * &x).norm() / x.norm().max(1e-300));
    }
    let m_end = &m_plus[segments].1;
    let tail_estimate = -0.5 * x.dot(&(m_end * &x));
    let x0n = p.x0.norm();
    let decay_ratio = if x0n == 0.0 {
        0.0
    } else {
        trajectory.iter().map(|r| DVector::from_vec(r.x.clone()).norm() * (beta * r.t).exp() / x0n).fold(0.0, f64::max)
    };
    let m0_norm = linalg::spectral_norm(&m_plus[0].1);
    let decay_ok = decay_ratio <= ed.eta_hat * (1.0 + m0_norm * m0_norm).sqrt() * (1.0 + 1e-6);
    let q_coeff = trajectory
        .iter()
        .filter_map(|r| {
            let xn2: f64 = r.x.iter().map(|v| v * v).sum();
            (xn2 > 0.0).then(|| r.q.abs() / xn2)
        })
        .fold(0.0, f64::max);
    let c = q_coeff * (ed.eta_hat * ed.eta_hat) * (1.0 + m0_norm * m0_norm) * x0n * x0n / (2.0 * beta);
    let truncation_bound = c * (-2.0 * beta * opts.t_report).exp();
    Ok(LQSolution {
        feasible: true,
        omega: omega.clone(),
        m_plus,
        trajectory,
        value,
        tail_estimate,
        truncation_bound,
        beta_hat: beta,
        eta_hat: ed.eta_hat,
        feedback_defect,
        graph_defect,
        decay_ratio,
        decay_ok,
    })
}

fn segment_rhs(p: &LQProblem, field: &CoefficientField, omega: &BasePoint, t: f64, z: &DMatrix<f64>, r_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.n;
    let w = p.flow.advance(omega, t);
    let h = field.eval_h_unchecked::<f64>(&w);
    let zz = z.rows(0, 2 * n).into_owned();
    let dz = h * &zz;
    let x = DVector::from_iterator(n, zz.iter().take(n).copied());
    let y = DVector::from_iterator(n, zz.iter().skip(n).copied());
    let u = r_inv * (p.b.eval(&w).transpose() * y - p.g_cross.eval(&w).transpose() * &x);
    let q = p.supply_rate(&w, &x, &u);
    DMatrix::from_iterator(2 * n + 1, 1, dz.iter().copied().chain(std::iter::once(q)))
}
