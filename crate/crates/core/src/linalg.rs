//! Small dense linear-algebra helpers for Lagrange frames and symmetric matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// The symplectic unit `[[0, -I], [I, 0]]`.
pub fn j_matrix<T: Scalar>(n: usize) -> DMatrix<T> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -T::one();
        j[(n + i, i)] = T::one();
    }
    j
}

/// Assembles `[[a, b], [c, d]]` from four equally sized square blocks.
pub fn block2<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>, c: &DMatrix<T>, d: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

/// Stacks `[[top], [bottom]]`.
pub fn stack<T: Scalar>(top: &DMatrix<T>, bottom: &DMatrix<T>) -> DMatrix<T> {
    let (n, k) = top.shape();
    let mut m = DMatrix::zeros(n + bottom.nrows(), k);
    m.view_mut((0, 0), (n, k)).copy_from(top);
    m.view_mut((n, 0), (bottom.nrows(), k)).copy_from(bottom);
    m
}

pub fn top_block<T: Scalar>(frame: &DMatrix<T>) -> DMatrix<T> {
    let n = frame.nrows() / 2;
    frame.rows(0, n).into_owned()
}

pub fn bottom_block<T: Scalar>(frame: &DMatrix<T>) -> DMatrix<T> {
    let n = frame.nrows() / 2;
    frame.rows(n, n).into_owned()
}

/// In-place modified Gram-Schmidt with one reorthogonalization pass.
///
/// Returns `log R_ii` for every column; the diagonal of the implied triangular
/// factor is real and positive, so determinants of sub-blocks keep their phase.
/// A column that collapses to zero yields `-inf`.
pub fn orthonormalize<T: Scalar>(z: &mut DMatrix<T>) -> Vec<f64> {
    let k = z.ncols();
    let mut logs = Vec::with_capacity(k);
    for j in 0..k {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = z.column(i).dotc(&z.column(j));
                let qi = z.column(i).into_owned();
                z.column_mut(j).axpy(-proj, &qi, T::one());
            }
        }
        let norm = z.column(j).norm();
        if norm > 0.0 && norm.is_finite() {
            z.column_mut(j).scale_mut(1.0 / norm);
            logs.push(norm.ln());
        } else {
            logs.push(f64::NEG_INFINITY);
        }
    }
    logs
}

pub fn orthonormalized<T: Scalar>(z: &DMatrix<T>) -> DMatrix<T> {
    let mut q = z.clone();
    orthonormalize(&mut q);
    q
}

pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn min_singular<T: Scalar>(m: &DMatrix<T>) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `sin` of the largest principal angle between two planes given by
/// orthonormal bases of equal dimension.
pub fn plane_distance<T: Scalar>(q1: &DMatrix<T>, q2: &DMatrix<T>) -> f64 {
    let residual = q2 - q1 * (q1.adjoint() * q2);
    spectral_norm(&residual)
}

/// `sin` of the smallest principal angle between two complementary planes.
pub fn transversality<T: Scalar>(q1: &DMatrix<T>, q2: &DMatrix<T>) -> f64 {
    let residual = q2 - q1 * (q1.adjoint() * q2);
    min_singular(&residual)
}

pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|x| x.modulus()).fold(0.0, f64::max)
}

/// Defect of symmetry under plain transposition.
pub fn symmetry_defect<T: Scalar>(m: &DMatrix<T>) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn symmetrize<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()).scale(0.5)
}

/// Eigenvalues (ascending) of the Hermitian part of `m`.
pub fn hermitian_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let h = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

pub fn min_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue<T: Scalar>(m: &DMatrix<T>) -> f64 {
    hermitian_eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn real_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn imag_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|z| z.im)
}

pub fn to_complex<T: Scalar>(m: &DMatrix<T>) -> DMatrix<Complex64> {
    m.map(|x| x.to_c64())
}

/// Deterministic orthonormal `rows x cols` frame in general position.
pub fn generic_frame(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    orthonormalize(&mut m);
    m
}

/// Determinant of the `n x n` complex matrix `top - i * bottom`.
pub fn det_top_minus_i_bottom<T: Scalar>(frame: &DMatrix<T>) -> Complex64 {
    let n = frame.nrows() / 2;
    let m = DMatrix::from_fn(n, frame.ncols(), |i, j| {
        frame[(i, j)].to_c64() - Complex64::i() * frame[(n + i, j)].to_c64()
    });
    m.determinant()
}

/// Solves `x * a = b` for `x`, i.e. returns `b * a^{-1}`.
pub fn right_divide<T: Scalar>(b: &DMatrix<T>, a: &DMatrix<T>) -> Option<DMatrix<T>> {
    let at = a.transpose();
    let bt = b.transpose();
    at.lu().solve(&bt).map(|x| x.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_squares_to_minus_identity() {
        let j = j_matrix::<f64>(3);
        let jj = &j * &j;
        assert!(max_abs(&(jj + DMatrix::identity(6, 6))) < 1e-15);
    }

    #[test]
    fn orthonormalize_preserves_span() {
        let mut z = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 0.0, 1.0, 3.0, 0.5, 1.0, 1.0]);
        let orig = z.clone();
        let logs = orthonormalize(&mut z);
        assert!(logs.iter().all(|l| l.is_finite()));
        assert!(max_abs(&(z.transpose() * &z - DMatrix::identity(2, 2))) < 1e-14);
        assert!(plane_distance(&z, &orthonormalized(&orig)) < 1e-14);
    }

    #[test]
    fn distance_of_orthogonal_lines_is_one() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((plane_distance(&a, &b) - 1.0).abs() < 1e-15);
        assert!((transversality(&a, &b) - 1.0).abs() < 1e-15);
        assert!(plane_distance(&a, &a) < 1e-15);
    }

    #[test]
    fn right_divide_inverts() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 4.0, 1.0]);
        let x = right_divide(&b, &a).unwrap();
        assert!(max_abs(&(x * a - b)) < 1e-14);
    }
}
