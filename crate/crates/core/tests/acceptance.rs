//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use hamdich::base_flow::BasePoint;
use hamdich::dichotomy::{
    classify_family, default_probes, detect_ed, nonoscillation_check, uwd_test, ClassifyOptions, EdThresholds, FamilyClass,
    UwdOptions, Verdict,
};
use hamdich::hamiltonian::{CoefficientField, Family};
use hamdich::lq_control::{build_hamiltonian, cost_of_control, m_plus_at, synthesize, LQProblem, SynthesisOptions};
use hamdich::param_scan::{
    find_alpha_star, rho_curve, stieltjes_invert, weyl_monotonicity_check, weyl_sampler, ScanOptions, StieltjesOptions,
};
use hamdich::propagator::{cocycle_check, fundamental_matrix};
use hamdich::riccati_weyl::{principal_functions, riccati_flow, weyl_minus, weyl_plus, WeylOptions, WeylRole};
use hamdich::rotation::{rotation_number, rotation_profile, DEFAULT_HORIZON};
use hamdich::{linalg, presets, Error};

struct Check {
    failures: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { failures: Vec::new() }
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn close(&mut self, got: f64, want: f64, tol: f64, what: &str) {
        self.expect((got - want).abs() <= tol, format!("{what}: got {got}, want {want} ± {tol}"));
    }
}

type Outcome = Result<Check, Error>;

fn grid(f: &Family) -> Vec<BasePoint> {
    f.base.flow().grid(8, 0.7548776662466927)
}

fn criterion_1() -> Outcome {
    let mut c = Check::new();
    let fam = presets::ex1();
    let o = fam.base.flow().origin();
    let w = WeylOptions::default();
    for lambda in [-2.0, -1.0, 0.0, 1.0, 5.0] {
        let f = fam.at_real(lambda);
        let m = weyl_plus(&f, &o, &w)?.re()[(0, 0)];
        c.close(m, lambda / 2.0, 1e-6, &format!("M+({lambda})"));
        let minus = weyl_minus(&f, &o, &w);
        c.expect(matches!(minus, Err(Error::NcFailure { .. })), format!("M-({lambda}) should not exist, got {minus:?}"));
    }
    let g = grid(&fam);
    let opts = ScanOptions::default();
    let a = find_alpha_star(&fam, &g, &opts)?;
    c.expect(a.alpha_star.is_infinite() && a.boundary.capped, format!("alpha* should be capped, got {}", a.alpha_star));
    for row in rho_curve(&fam, &g, &[0.5, 1.0, 2.0], &opts)? {
        c.close(row.rho, 1.0 / row.alpha, 1e-3, &format!("rho({})", row.alpha));
    }
    Ok(c)
}

fn criterion_2() -> Outcome {
    let mut c = Check::new();
    let fam = presets::ex2();
    let g = grid(&fam);
    let opts = ScanOptions::default();
    let a = find_alpha_star(&fam, &g, &opts)?;
    c.close(a.alpha_star, 1.0, 1e-3, "alpha*");
    let above = detect_ed(&fam.at_real(a.alpha_star + 1e-2), &g, &opts.ed)?;
    let below = detect_ed(&fam.at_real(a.alpha_star - 1e-2), &g, &opts.ed)?;
    c.expect(above.verdict != Verdict::Ed, format!("ED above alpha*: {:?}", above.verdict));
    c.expect(below.verdict == Verdict::Ed, format!("ED below alpha*: {:?}", below.verdict));
    for row in rho_curve(&fam, &g, &[0.25, 0.5, 0.75], &opts)? {
        c.close(row.rho, -1.0 + 1.0 / row.alpha, 1e-3, &format!("rho({})", row.alpha));
    }
    Ok(c)
}

fn criterion_3() -> Outcome {
    let mut c = Check::new();
    let fam = presets::ex3();
    let g = grid(&fam);
    let o = fam.base.flow().origin();
    let th = EdThresholds::default();
    for lambda in [-4.0, 0.0, 0.9] {
        let r = detect_ed(&fam.at_real(lambda), &g, &th)?;
        let nc = r.is_ed() && nonoscillation_check(&r)?.holds;
        c.expect(r.is_ed() && nc, format!("ED + NC at {lambda}: {:?}, nc {nc}", r.verdict));
    }
    for lambda in [1.5, 2.0] {
        let r = detect_ed(&fam.at_real(lambda), &g, &th)?;
        c.expect(r.verdict == Verdict::NoEd, format!("no ED at {lambda}: {:?}", r.verdict));
    }
    for lambda in [-4.0, 0.0, 0.9, 1.5, 2.0] {
        let want = if lambda < 1.0 { 0.0 } else { (lambda - 1.0_f64).sqrt() };
        let r = rotation_number(&fam.at_real(lambda), &o, DEFAULT_HORIZON, 1e-10)?;
        c.close(r.value, want, 1e-3, &format!("rotation({lambda})"));
    }
    for row in rho_curve(&fam, &g, &[-4.0, 0.0, 0.9], &ScanOptions::default())? {
        c.expect(row.rho.is_infinite() && row.capped, format!("rho({}) should hit the cap, got {}", row.alpha, row.rho));
    }
    let sampler = weyl_sampler(&fam, &o, WeylRole::MPlus, WeylOptions::default());
    let s = stieltjes_invert(&sampler, 1.0, 2.0, &StieltjesOptions::default())?;
    // (1/π) ∫₁² √(t − 1) dt
    c.close(s.mass[(0, 0)], 2.0 / (3.0 * PI), 1e-2, "mass of (1, 2)");
    Ok(c)
}

fn criterion_4() -> Outcome {
    let mut c = Check::new();
    let fam = presets::ex4();
    let g = grid(&fam);
    let opts = ScanOptions::default();
    let a = find_alpha_star(&fam, &g, &opts)?;
    c.close(a.alpha_star, 1.0, 1e-3, "alpha*");
    for row in rho_curve(&fam, &g, &[0.9, 0.95, 0.99], &opts)? {
        c.close(row.rho, 1.0 / row.alpha, 1e-2, &format!("rho({})", row.alpha));
    }
    Ok(c)
}

/// Every preset at a few parameter values.
fn preset_members() -> Vec<(String, CoefficientField)> {
    let mut out = Vec::new();
    for (name, lambdas) in [
        ("ex1", vec![-1.0, 1.0]),
        ("ex2", vec![0.5, 2.0]),
        ("ex3", vec![0.0, 2.0]),
        ("ex4", vec![0.5, 1.5]),
        ("abnormal", vec![0.0, 1.0]),
        ("torus", vec![0.0, 3.0]),
    ] {
        let fam = presets::family(name).unwrap();
        for l in lambdas {
            out.push((format!("{name}@{l}"), fam.at_real(l)));
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let mut c = Check::new();
    for (name, f) in preset_members() {
        let w = f.flow().point(vec![0.3; f.flow().dim()])?;
        for t in [-100.0, -37.5, 50.0, 100.0] {
            let u = fundamental_matrix::<f64>(&f, &w, t, 1e-12)?;
            c.expect(u.symplectic_defect <= 1e-8, format!("{name}: symplectic defect {} at t={t}", u.symplectic_defect));
        }
        for (s, t) in [(30.0, 70.0), (-60.0, 40.0), (-50.0, -50.0)] {
            let r = cocycle_check(&f, &w, s, t, 1e-12)?;
            c.expect(r.relative <= 1e-8, format!("{name}: cocycle defect {} at s={s}, t={t}", r.relative));
        }
    }

    // Riccati flow against the propagated graph and the flow law
    for name in ["ex3", "torus"] {
        let f = presets::family(name)?.at_real(0.0);
        let w = f.flow().origin();
        let m0 = DMatrix::from_element(1, 1, -0.5);
        let direct = riccati_flow::<f64>(&f, &w, &m0, 3.0, 1e-12)?;
        let u = fundamental_matrix::<f64>(&f, &w, 3.0, 1e-12)?;
        let graph = (&u.u2() + &u.u4() * &m0) * (&u.u1() + &u.u3() * &m0).try_inverse().unwrap();
        let mid = riccati_flow::<f64>(&f, &w, &m0, 1.2, 1e-12)?;
        let composed = riccati_flow::<f64>(&f, &f.flow().advance(&w, 1.2), &mid, 1.8, 1e-12)?;
        let scale = direct.norm().max(1.0);
        c.expect((&direct - graph).norm() / scale <= 1e-7, format!("{name}: Riccati flow vs frame graph"));
        c.expect((&direct - composed).norm() / scale <= 1e-7, format!("{name}: Riccati flow law"));
    }

    // Herglotz sign of M⁺ on random points of the upper half plane
    let mut rng = common::rng(5);
    let mut worst = f64::INFINITY;
    for name in ["ex3", "torus"] {
        let fam = presets::family(name)?;
        let o = fam.base.flow().origin();
        for _ in 0..50 {
            let lambda = Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(0.05..3.0));
            let m = weyl_plus(&fam.at(lambda), &o, &WeylOptions::default())?;
            worst = worst.min(m.im_min_eigenvalue());
        }
    }
    c.expect(worst >= -1e-8, format!("Herglotz sign slack {worst}"));

    // Weyl monotonicity on pairs inside the ED + NC interval
    for (name, alphas) in [
        ("ex1", vec![-2.0, 0.0, 1.0, 5.0]),
        ("ex2", vec![-1.0, 0.0, 0.5, 0.9]),
        ("ex3", vec![-4.0, 0.0, 0.5, 0.9]),
        ("ex4", vec![-1.0, 0.0, 0.5, 0.9]),
        ("torus", vec![-1.0, 0.0, 1.0]),
    ] {
        let fam = presets::family(name)?;
        let g = fam.base.flow().grid(4, 0.7548776662466927);
        for i in 0..alphas.len() {
            for j in i + 1..alphas.len() {
                let cert = weyl_monotonicity_check(&fam, &g, alphas[i], alphas[j], &WeylOptions::default())?;
                c.expect(cert.min_eigenvalue >= -1e-7, format!("{name}: certificate {} on ({}, {})", cert.min_eigenvalue, alphas[i], alphas[j]));
            }
        }
    }

    // rotation number nondecreasing in α
    for (name, alphas) in [("ex3", vec![-1.0, 0.0, 0.5, 1.5, 2.0, 3.0, 5.0]), ("torus", vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0])] {
        let fam = presets::family(name)?;
        let p = rotation_profile(&fam, &fam.base.flow().origin(), &alphas, DEFAULT_HORIZON, 1e-10)?;
        c.expect(p.monotone, format!("{name}: rotation profile decreases by {}", p.monotonicity_defect));
    }
    Ok(c)
}

fn random_constant_field(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let h1 = common::random_matrix(rng, n, n, 1.0);
    let h2 = common::random_pd(rng, n, 0.2);
    let h3 = common::random_pd(rng, n, 0.2);
    (h1, h2, h3)
}

fn criterion_6() -> Outcome {
    let mut c = Check::new();
    let mut rng = common::rng(6);
    let w = WeylOptions::default();
    let th = EdThresholds::default();
    let mut uwd_cases: Vec<CoefficientField> = Vec::new();
    for i in 0..20 {
        let n = 1 + i % 2;
        let (h1, h2, h3) = random_constant_field(&mut rng, n);
        let h = common::hamiltonian(&h1, &h2, &h3);
        let f = CoefficientField::constant(h1, h2, h3, None)?;
        let o = f.flow().origin();
        let ed = detect_ed(&f, &[o.clone()], &th)?;
        c.expect(ed.is_ed(), format!("field {i}: ED {:?}", ed.verdict));
        let mp = weyl_plus(&f, &o, &w)?.re();
        let mm = weyl_minus(&f, &o, &w)?.re();
        c.expect(linalg::max_eigenvalue(&mp) < 0.0, format!("field {i}: M+ not negative definite"));
        c.expect(linalg::min_eigenvalue(&mm) > 0.0, format!("field {i}: M- not positive definite"));
        let p = principal_functions(&f, &o, &w)?;
        let scale = mp.norm().max(mm.norm()).max(1.0);
        c.expect((&mp - p.plus.re()).norm() / scale <= 1e-6, format!("field {i}: M+ != N+"));
        c.expect((&mm - p.minus.re()).norm() / scale <= 1e-6, format!("field {i}: M- != N-"));
        let op = common::invariant_graph(&h, true);
        let om = common::invariant_graph(&h, false);
        c.expect((&mp - op).norm() / scale <= 1e-6, format!("field {i}: M+ vs invariant-subspace oracle"));
        c.expect((&mm - om).norm() / scale <= 1e-6, format!("field {i}: M- vs invariant-subspace oracle"));
        uwd_cases.push(f);
    }
    // H3 ≻ 0 with indefinite or negative H2: oscillatory and mixed cases
    for i in 0..10 {
        let n = 1 + i % 2;
        let h1 = common::random_matrix(&mut rng, n, n, 0.5);
        let h2 = -common::random_pd(&mut rng, n, 0.2) + DMatrix::identity(n, n) * rng.random_range(-0.5..1.0);
        let h3 = common::random_pd(&mut rng, n, 0.2);
        uwd_cases.push(CoefficientField::constant(h1, h2, h3, None)?);
    }
    uwd_cases.push(presets::ex3().at_real(2.0));
    uwd_cases.push(presets::torus().at_real(0.0));
    uwd_cases.push(presets::torus().at_real(4.0));
    for (i, f) in uwd_cases.iter().enumerate() {
        let g = f.flow().grid(4, 0.7548776662466927);
        let uwd = uwd_test(f, &g, &UwdOptions::default())?.verdict;
        let r = rotation_number(f, &f.flow().origin(), DEFAULT_HORIZON, 1e-10)?;
        let zero = r.value.abs() <= 2.0 * r.error_bar;
        c.expect(uwd == zero, format!("case {i}: uwd {uwd} but rotation {} ± {}", r.value, r.error_bar));
    }
    Ok(c)
}

fn random_lq(rng: &mut rand_chacha::ChaCha8Rng) -> LQProblem {
    let n = rng.random_range(1..=3usize);
    let m = rng.random_range(1..=n);
    let a = common::random_matrix(rng, n, n, 1.0);
    let b = common::random_matrix(rng, n, m, 1.0);
    let r = common::random_pd(rng, m, 0.5);
    let g = common::random_matrix(rng, n, m, 0.3);
    let q = common::random_pd(rng, n, 0.3);
    let gg = &q + &g * r.clone().try_inverse().unwrap() * g.transpose();
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    LQProblem::constant(a, b, gg, Some(g), r, x0).unwrap()
}

fn criterion_7() -> Outcome {
    let mut c = Check::new();
    let p = presets::scalar_lq();
    let o = p.flow.origin();
    let sol = synthesize(&p, &o, &SynthesisOptions::default())?;
    // exact DP on piecewise-constant controls, extrapolated in the step size
    let (j1, j2) = (common::scalar_qp_cost(1.0, 20.0, 1e-3), common::scalar_qp_cost(1.0, 20.0, 5e-4));
    let oracle = (4.0 * j2 - j1) / 3.0;
    c.close(sol.total_value(), oracle, 1e-6, "scalar J vs QP oracle");
    c.expect(sol.truncation_bound <= 1e-6, format!("truncation bound {}", sol.truncation_bound));
    for s in &sol.trajectory {
        c.expect((s.u[0] + s.x[0]).abs() <= 1e-8 * s.x[0].abs().max(1e-300), format!("u != -x at t={}", s.t));
    }

    let mut rng = common::rng(7);
    let mut problems = Vec::new();
    for i in 0..10 {
        let p = random_lq(&mut rng);
        let f = build_hamiltonian(&p)?;
        let r_inv = p.r.clone().try_inverse().unwrap();
        let o = p.flow.origin();
        let (a, b, g) = (p.a.eval(&o), p.b.eval(&o), p.g_cross.eval(&o));
        let a_bar = &a - &b * &r_inv * g.transpose();
        let q_bar = p.g_state.eval(&o) - &g * &r_inv * g.transpose();
        let oracle = common::care_newton_kleinman(&a_bar, &b, &q_bar, &p.r);
        let m = m_plus_at(&f, &o, &WeylOptions::default())?;
        let err = (&oracle + &m).norm() / oracle.norm().max(1.0);
        c.expect(err <= 1e-6, format!("problem {i}: -M+ vs Riccati oracle {err}"));
        problems.push((p, m));
    }

    // perturbations of the feedback never lower the cost
    let horizon = 40.0;
    let mut worst = f64::INFINITY;
    for k in 0..100 {
        let (p, m) = &problems[k % problems.len()];
        let o = p.flow.origin();
        let gain = p.gain(&o, m)?;
        let (base, _) = cost_of_control(p, &o, &p.x0, |_, x| &gain * x, horizon, 1e-11)?;
        let amp = 10f64.powf(rng.random_range(-4.0..0.0));
        let freq = rng.random_range(0.5..3.0);
        let dir = DVector::from_fn(p.m, |_, _| rng.random_range(-1.0..1.0));
        let (perturbed, _) = cost_of_control(p, &o, &p.x0, |t, x| &gain * x + &dir * (amp * (-t).exp() * (freq * t).sin()), horizon, 1e-11)?;
        worst = worst.min(perturbed - base);
    }
    c.expect(worst >= -1e-8, format!("a perturbation beat the synthesized cost by {}", -worst));
    Ok(c)
}

fn criterion_8() -> Outcome {
    let mut c = Check::new();
    let th = EdThresholds::default();
    let opts = ClassifyOptions::default();
    let fam = presets::abnormal();
    let g = grid(&fam);
    let r = classify_family(&fam, &g, &default_probes(), &th, &opts)?;
    c.expect(r.class == FamilyClass::O2, format!("abnormal preset classified {:?}", r.class));
    if let Some(z0) = &r.witness {
        let o = fam.base.flow().origin();
        for lambda in [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let f = fam.at(lambda);
            let mut sup: f64 = 0.0;
            for t in [-50.0, -10.0, 10.0, 50.0] {
                let u = fundamental_matrix::<Complex64>(&f, &o, t, 1e-11)?;
                sup = sup.max((&u.u * z0).norm() / z0.norm());
            }
            c.expect(sup <= 1.0 + 1e-6, format!("witness grows by {sup} at lambda = {lambda}"));
        }
    } else {
        c.expect(false, "no witness reported");
    }
    for name in ["ex1", "ex2", "ex3", "ex4"] {
        let fam = presets::family(name)?;
        let r = classify_family(&fam, &grid(&fam), &default_probes(), &th, &opts)?;
        c.expect(r.class == FamilyClass::O1, format!("{name} classified {:?}", r.class));
    }
    Ok(c)
}

fn main() {
    // (name, runner, time budget in seconds)
    let criteria: [(&str, fn() -> Outcome, Option<f64>); 8] = [
        ("1 example-1 suite", criterion_1, Some(30.0)),
        ("2 example-2 suite", criterion_2, Some(60.0)),
        ("3 example-3 suite", criterion_3, None),
        ("4 example-4 suite", criterion_4, None),
        ("5 structural properties", criterion_5, None),
        ("6 bridge suite", criterion_6, None),
        ("7 LQ suite", criterion_7, None),
        ("8 classification suite", criterion_8, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let outcome = outcome.map(|mut c| {
            if let Some(b) = budget {
                c.expect(secs < b, format!("runtime {secs:.1} s exceeds {b} s"));
            }
            c
        });
        match outcome {
            Ok(c) if c.failures.is_empty() => println!("criterion {name}: PASS ({secs:.1} s)"),
            Ok(c) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1} s)");
                for f in c.failures {
                    println!("    {f}");
                }
            }
            Err(e) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1} s) error: {e}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
