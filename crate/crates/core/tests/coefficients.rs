mod common;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use hamdich::base_flow::{make_flow, BaseFlow, BasePoint, FlowDescriptor};
use hamdich::hamiltonian::{CoefficientField, PerturbationTag};
use hamdich::presets;
use hamdich::propagator::fundamental_matrix;
use hamdich::trig::{TrigMatrix, TrigTerm};

const GOLDEN: f64 = 1.618_033_988_749_895;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn j(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

fn scalar_field(h1: f64, h2: f64, h3: f64) -> CoefficientField {
    let m = |x| DMatrix::from_element(1, 1, x);
    CoefficientField::constant(m(h1), m(h2), m(h3), Some(m(1.0))).unwrap()
}

#[test]
fn flow_construction() {
    let a = make_flow(&FlowDescriptor::Autonomous).unwrap();
    assert_eq!(a.dim(), 0);
    assert!(BaseFlow::torus(vec![1.0, GOLDEN]).unwrap().incommensurate());
    assert!(!BaseFlow::torus(vec![1.0, 2.0]).unwrap().incommensurate());
    assert!(BaseFlow::periodic(0.0).is_err());
    assert!(BaseFlow::periodic(-1.0).is_err());
    assert!(BaseFlow::torus(vec![]).is_err());
}

#[test]
fn advance_examples() {
    let f = BaseFlow::torus(vec![0.5]).unwrap();
    let w = f.point(vec![0.75]).unwrap();
    assert!((f.advance(&w, 1.0).coords()[0] - 0.25).abs() < 1e-15);
    assert_eq!(f.advance(&w, 0.0), w);
}

#[test]
fn sample_orbit_examples() {
    let f = BaseFlow::torus(vec![GOLDEN]).unwrap();
    let w = f.point(vec![0.3]).unwrap();
    assert_eq!(f.sample_orbit(&w, 1, 0.1).unwrap(), vec![w.clone()]);
    let a = BaseFlow::autonomous();
    let pts = a.sample_orbit(&a.origin(), 5, 0.1).unwrap();
    assert!(pts.iter().all(|p| *p == a.origin()) && pts.len() == 5);

    // star discrepancy of the sorted sample
    let mut xs: Vec<f64> = f.sample_orbit(&f.origin(), 10_000, 0.1).unwrap().iter().map(|p| p.coords()[0]).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    assert!(d < 0.05, "discrepancy {d}");
}

#[test]
fn assembled_matrices() {
    let o = BasePoint::origin(0);
    let zero = scalar_field(0.0, 0.0, 0.0).eval_h::<f64>(&o).unwrap();
    assert_eq!(zero, DMatrix::zeros(2, 2));
    let ex1 = scalar_field(-1.0, 0.0, 0.0).eval_h::<f64>(&o).unwrap();
    assert_eq!(ex1, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
    let ex3 = scalar_field(0.0, 1.0, 1.0).eval_h::<f64>(&o).unwrap();
    assert_eq!(ex3, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
}

#[test]
fn perturbation_examples() {
    let o = BasePoint::origin(0);
    let f = scalar_field(0.0, 0.0, 1.0);
    assert_eq!(f.perturb_h3(c(0.0, 0.0)).unwrap().eval_h::<f64>(&o).unwrap(), f.eval_h::<f64>(&o).unwrap());
    assert_eq!(f.perturb_h3(c(2.0, 0.0)).unwrap().h3::<f64>(&o)[(0, 0)], 3.0);
    assert!(f.perturb_h3(c(0.0, 1.0)).unwrap().is_complex());
    assert!(!f.perturb_h3(c(2.0, 0.0)).unwrap().is_complex());
    assert_eq!(f.perturb_h2(c(3.0, 0.0)).unwrap().h2::<f64>(&o)[(0, 0)], -3.0);

    let lambda = 1.7;
    let ex1 = presets::ex1().at_real(lambda);
    let want = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -lambda, 1.0]);
    assert_eq!(ex1.eval_h::<f64>(&o).unwrap(), want);

    let eps = 0.3;
    let reg = ex1.regularize(eps);
    assert_eq!(reg.eval_h::<f64>(&o).unwrap(), DMatrix::from_row_slice(2, 2, &[-1.0, eps, -lambda, 1.0]));
    assert_eq!(ex1.regularize(0.0).eval_h::<f64>(&o).unwrap(), want);
    let neg = ex1.regularize(-0.1);
    assert!(matches!(neg.tags().last(), Some(PerturbationTag::Regularized { non_regularizing: true, .. })));
}

#[test]
fn swap_examples() {
    let o = BasePoint::origin(0);
    let lambda = 0.8;
    let f = presets::ex1().at_real(lambda);
    let s = f.swap_variables();
    assert_eq!(s.eval_h::<f64>(&o).unwrap(), DMatrix::from_row_slice(2, 2, &[1.0, -lambda, 0.0, -1.0]));
    assert_eq!(s.swap_variables(), f);

    let f = presets::torus().at_real(0.5);
    let w = f.flow().point(vec![0.1, 0.6]).unwrap();
    let perm = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    for t in [-3.0, 2.5] {
        let u = fundamental_matrix::<f64>(&f, &w, t, 1e-12).unwrap().u;
        let us = fundamental_matrix::<f64>(&f.swap_variables(), &w, t, 1e-12).unwrap().u;
        let d = (&us - &perm * &u * &perm).norm() / u.norm();
        assert!(d < 1e-8, "swap defect {d}");
    }
}

#[test]
fn general_perturb_examples() {
    let f = presets::torus().base;
    let w = f.flow().point(vec![0.2, 0.7]).unwrap();
    let d = f.flow().dim();
    assert_eq!(f.general_perturb(c(0.0, 0.0), &TrigMatrix::identity(2, d)).unwrap().eval_h::<f64>(&w).unwrap(), f.eval_h::<f64>(&w).unwrap());

    // Γ = [[0, 0], [0, Δ]] is the H3-type direction
    let gamma = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let g = TrigMatrix::constant(gamma, d);
    let a = f.general_perturb(c(0.4, 0.0), &g).unwrap().eval_h::<f64>(&w).unwrap();
    let b = f.perturb_h3(c(0.4, 0.0)).unwrap().eval_h::<f64>(&w).unwrap();
    assert!((a - b).norm() < 1e-14);

    // Γ = [[Δ, 0], [0, (−ε/α)I]] moves along the line (α, ε) of the regularized family
    let (alpha, eps) = (0.6, 0.25);
    let g = TrigMatrix::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -eps / alpha]), d);
    let a = f.general_perturb(c(alpha, 0.0), &g).unwrap().eval_h::<f64>(&w).unwrap();
    let b = presets::torus().at_real(alpha).regularize(-eps).eval_h::<f64>(&w).unwrap();
    assert!((a - b).norm() < 1e-14);

    // J⁻¹Γ against the block rule, J = [[0, −I], [I, 0]] so J⁻¹ = j(1)
    let mut r = common::rng(3);
    let raw = common::random_matrix(&mut r, 2, 2, 1.0);
    let sym = (&raw + raw.transpose()) * 0.5;
    let h0 = f.eval_h::<f64>(&w).unwrap();
    let h = f.general_perturb(c(0.3, 0.0), &TrigMatrix::constant(sym.clone(), d)).unwrap().eval_h::<f64>(&w).unwrap();
    let want = &h0 + j(1) * sym * 0.3;
    assert!((h - want).norm() < 1e-14);
}

#[test]
fn asymmetric_blocks_rejected() {
    let h2 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
    assert!(CoefficientField::constant(DMatrix::zeros(2, 2), h2, DMatrix::identity(2, 2), None).is_err());
}

#[test]
fn trig_product_matches_pointwise_product() {
    let term = |k: Vec<i64>, c: f64, s: f64| TrigTerm { k, cos: DMatrix::from_element(1, 1, c), sin: DMatrix::from_element(1, 1, s) };
    let a = TrigMatrix::from_terms(1, 1, 2, vec![term(vec![0, 0], 1.0, 0.0), term(vec![1, 0], 0.5, -0.2), term(vec![1, -1], 0.0, 0.7)]).unwrap();
    let b = TrigMatrix::from_terms(1, 1, 2, vec![term(vec![0, 1], 0.3, 0.4), term(vec![2, 0], -1.0, 0.0)]).unwrap();
    let p = a.mul(&b).unwrap();
    let flow = BaseFlow::torus(vec![1.0, GOLDEN]).unwrap();
    for w in flow.grid(50, 0.37) {
        let want = a.eval(&w) * b.eval(&w);
        assert!((p.eval(&w) - want).norm() < 1e-13);
    }
}

fn torus_field() -> impl Strategy<Value = CoefficientField> {
    prop::collection::vec(-1.0..1.0f64, 8).prop_map(|v| {
        let term = |k: [i64; 2], c: f64, s: f64| TrigTerm { k: k.to_vec(), cos: DMatrix::from_element(1, 1, c), sin: DMatrix::from_element(1, 1, s) };
        let t = |c0, c1, s1| TrigMatrix::from_terms(1, 1, 2, vec![term([0, 0], c0, 0.0), term([1, 1], c1, s1)]).unwrap();
        CoefficientField::new(
            BaseFlow::torus(vec![1.0, GOLDEN]).unwrap(),
            t(v[0], v[1], v[2]),
            t(v[3], v[4], v[5]),
            t(v[6], v[7], 0.0),
            Some(TrigMatrix::scalar(1.0, 2)),
            Default::default(),
        )
        .unwrap()
    })
}

proptest! {
    #[test]
    fn flow_group_law(x in 0.0..1.0f64, y in 0.0..1.0f64, s in -50.0..50.0f64, t in -50.0..50.0f64) {
        let f = BaseFlow::torus(vec![1.0, GOLDEN]).unwrap();
        let w = f.point(vec![x, y]).unwrap();
        let two = f.advance(&f.advance(&w, s), t);
        prop_assert!(two.circle_distance(&f.advance(&w, s + t)) <= 1e-12);
        prop_assert!(f.advance(&f.advance(&w, t), -t).circle_distance(&w) <= 1e-12);
    }

    #[test]
    fn infinitesimally_symplectic(f in torus_field(), x in 0.0..1.0f64, y in 0.0..1.0f64, re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let w = f.flow().point(vec![x, y]).unwrap();
        let jm = j(1);
        let h = f.eval_h::<f64>(&w).unwrap();
        prop_assert!((h.transpose() * &jm + &jm * &h).norm() <= 1e-12);
        let hc = f.perturb_h3(c(re, im)).unwrap().eval_h::<Complex64>(&w).unwrap();
        let jc = jm.map(|v| c(v, 0.0));
        prop_assert!((hc.transpose() * &jc + &jc * &hc).norm() <= 1e-12);
    }

    #[test]
    fn h3_perturbations_add(f in torus_field(), a in -2.0..2.0f64, b in -2.0..2.0f64, x in 0.0..1.0f64) {
        let w = f.flow().point(vec![x, 0.5]).unwrap();
        let twice = f.perturb_h3(c(a, 0.0)).unwrap().perturb_h3(c(b, 0.0)).unwrap();
        let once = f.perturb_h3(c(a + b, 0.0)).unwrap();
        prop_assert!((twice.eval_h::<f64>(&w).unwrap() - once.eval_h::<f64>(&w).unwrap()).norm() <= 1e-14);
    }

    #[test]
    fn swap_is_involution(f in torus_field(), x in 0.0..1.0f64) {
        let w = f.flow().point(vec![x, 0.25]).unwrap();
        prop_assert_eq!(f.swap_variables().swap_variables().eval_h::<f64>(&w).unwrap(), f.eval_h::<f64>(&w).unwrap());
    }
}
