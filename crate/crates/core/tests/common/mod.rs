//! Independent reference computations for constant-coefficient systems.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-scale..scale))
}

/// `W Wᵀ + floor·I`.
pub fn random_pd(r: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let w = random_matrix(r, n, n, 1.0);
    &w * w.transpose() + DMatrix::identity(n, n) * floor
}

pub fn hamiltonian(h1: &DMatrix<f64>, h2: &DMatrix<f64>, h3: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h1.nrows();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(h1);
    h.view_mut((0, n), (n, n)).copy_from(h3);
    h.view_mut((n, 0), (n, n)).copy_from(h2);
    h.view_mut((n, n), (n, n)).copy_from(&(-h1.transpose()));
    h
}

/// Matrix sign function by the scaled Newton iteration.
pub fn sign_function(h: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = h.clone();
    for _ in 0..100 {
        let inv = s.clone().try_inverse().expect("no imaginary-axis eigenvalues");
        let det = s.determinant().abs();
        let c = det.powf(-1.0 / s.nrows() as f64);
        let next = (&s * c + inv / c) * 0.5;
        let done = (&next - &s).norm() <= 1e-15 * next.norm();
        s = next;
        if done {
            break;
        }
    }
    s
}

/// Graph `M` of the stable (`stable = true`) or unstable invariant subspace,
/// from `(S ± I) [I; M] = 0` solved in the least-squares sense.
pub fn invariant_graph(h: &DMatrix<f64>, stable: bool) -> DMatrix<f64> {
    let n = h.nrows() / 2;
    let sign = if stable { 1.0 } else { -1.0 };
    let k = sign_function(h) + DMatrix::identity(2 * n, 2 * n) * sign;
    let lhs = k.columns(n, n).into_owned();
    let rhs = -k.columns(0, n).into_owned();
    let m = lhs.svd(true, true).solve(&rhs, 1e-14).expect("full-rank system");
    (&m + m.transpose()) * 0.5
}

/// Solves `Aᵀ P + P A + Q = 0` through the Kronecker form.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let k = id.kronecker(&at) + at.kronecker(&id);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let x = k.lu().solve(&rhs).expect("nonsingular Lyapunov operator");
    let p = DMatrix::from_column_slice(n, n, x.as_slice());
    (&p + p.transpose()) * 0.5
}

/// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` by Newton–Kleinman,
/// started from a Bass-type stabilizing gain.
pub fn care_newton_kleinman(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let r_inv = r.clone().try_inverse().unwrap();
    let beta = a.norm() + 1.0;
    let shifted = -(a + DMatrix::identity(n, n) * beta);
    // (−A−βI) W + W (−A−βI)ᵀ = −2BBᵀ has W ≻ 0 for controllable pairs
    let w = lyapunov(&shifted.transpose(), &(b * b.transpose() * 2.0));
    let mut k = b.transpose() * w.try_inverse().expect("controllable pair");
    let mut p = DMatrix::zeros(n, n);
    for _ in 0..100 {
        let ac = a - b * &k;
        let next = lyapunov(&ac, &(q + k.transpose() * r * &k));
        k = &r_inv * b.transpose() * &next;
        let done = (&next - &p).norm() <= 1e-14 * next.norm().max(1.0);
        p = next;
        if done {
            break;
        }
    }
    p
}

/// Optimal cost of `x' = u`, `Q = ½(x² + u²)` over `[0, horizon]` with
/// piecewise-constant controls on steps `h`, by exact per-step integrals and
/// backward dynamic programming.
pub fn scalar_qp_cost(x0: f64, horizon: f64, h: f64) -> f64 {
    let steps = (horizon / h).round() as usize;
    let c = h * h * h / 3.0 + h;
    let mut p = 0.0;
    for _ in 0..steps {
        let a = h + p;
        let b = h * h / 2.0 + p * h;
        let d = c + p * h * h;
        p = a - b * b / d;
    }
    0.5 * p * x0 * x0
}
