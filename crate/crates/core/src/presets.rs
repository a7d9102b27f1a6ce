//! Built-in example families.

use nalgebra::{DMatrix, DVector};

use crate::base_flow::BaseFlow;
use crate::error::{Error, Result};
use crate::hamiltonian::{CoefficientField, DeclaredFlags, Family, FamilyKind};
use crate::lq_control::LQProblem;
use crate::trig::{TrigMatrix, TrigTerm};

pub const NAMES: [&str; 6] = ["ex1", "ex2", "ex3", "ex4", "abnormal", "torus"];

fn m1(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn scalar_family(h1: f64, h2: f64, h3: f64, kind: FamilyKind) -> Family {
    let f = CoefficientField::constant(m1(h1), m1(h2), m1(h3), Some(m1(1.0))).expect("constant scalar field");
    Family::new(f, kind).expect("Delta present")
}

/// `[[−1, 0], [−λ, 1]]`.
pub fn ex1() -> Family {
    scalar_family(-1.0, 0.0, 0.0, FamilyKind::H2)
}

/// `[[−1, 1], [−λ, 1]]`.
pub fn ex2() -> Family {
    scalar_family(-1.0, 0.0, 1.0, FamilyKind::H2)
}

/// `[[0, 1], [1 − λ, 0]]`.
pub fn ex3() -> Family {
    scalar_family(0.0, 1.0, 1.0, FamilyKind::H2)
}

/// Four-dimensional system coupling an `ex1`-type and an `ex3`-type block.
pub fn ex4() -> Family {
    let d = |a: f64, b: f64| DMatrix::from_diagonal(&DVector::from_vec(vec![a, b]));
    let f = CoefficientField::constant(d(-1.0, 0.0), d(0.0, 1.0), d(0.0, 1.0), Some(DMatrix::identity(2, 2))).expect("constant field");
    Family::new(f, FamilyKind::H2).expect("Delta present")
}

/// `H1 = H2 = 0`, `H3 = 1`: `(1, 0)` solves every member of the H3-type family.
pub fn abnormal() -> Family {
    scalar_family(0.0, 0.0, 1.0, FamilyKind::H3)
}

/// Quasi-periodic Schrödinger-type field over the golden-mean 2-torus:
/// `H1 = 0`, `H3 = 1`, `H2 = 2 + 0.5 cos 2πθ₁ + 0.3 cos 2πθ₂`.
pub fn torus() -> Family {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let flow = BaseFlow::torus(vec![1.0, phi]).expect("nonzero frequencies");
    let term = |k: [i64; 2], c: f64| TrigTerm { k: k.to_vec(), cos: m1(c), sin: m1(0.0) };
    let h2 = TrigMatrix::from_terms(1, 1, 2, vec![term([0, 0], 2.0), term([1, 0], 0.5), term([0, 1], 0.3)]).expect("valid table");
    let f = CoefficientField::new(
        flow,
        TrigMatrix::zeros(1, 1, 2),
        h2,
        TrigMatrix::scalar(1.0, 2),
        Some(TrigMatrix::scalar(1.0, 2)),
        DeclaredFlags { h3_psd: true, delta_pd: true, h2_pd: true },
    )
    .expect("valid field");
    Family::new(f, FamilyKind::H2).expect("Delta present")
}

pub fn family(name: &str) -> Result<Family> {
    match name {
        "ex1" => Ok(ex1()),
        "ex2" => Ok(ex2()),
        "ex3" => Ok(ex3()),
        "ex4" => Ok(ex4()),
        "abnormal" => Ok(abnormal()),
        "torus" => Ok(torus()),
        _ => Err(Error::InvalidArgument(format!("unknown preset {name:?}; known: {}", NAMES.join(", ")))),
    }
}

/// `x' = u`, `Q = ½(x² + u²)`, `x0 = 1`; optimal cost ½.
pub fn scalar_lq() -> LQProblem {
    LQProblem::constant(m1(0.0), m1(1.0), m1(1.0), None, m1(1.0), DVector::from_element(1, 1.0)).expect("valid problem")
}

pub fn lq(name: &str) -> Result<LQProblem> {
    match name {
        "scalar" => Ok(scalar_lq()),
        _ => Err(Error::InvalidArgument(format!("unknown LQ preset {name:?}; known: scalar"))),
    }
}
