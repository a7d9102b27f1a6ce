//! Fundamental matrices and solution frames of `z' = H(ω·t) z`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::base_flow::BasePoint;
use crate::error::{Error, Result};
use crate::hamiltonian::CoefficientField;
use crate::linalg;
use crate::ode::{Dop853, StepAction};
use crate::scalar::Scalar;

/// Symplectic defect above which a cocycle value is flagged degraded.
pub const DEFAULT_DEFECT_TOL: f64 = 1e-8;

/// `t ↦ H(ω·t)`, with the matrix cached for autonomous fields.
pub struct Generator<'a, T: Scalar> {
    field: &'a CoefficientField,
    omega: BasePoint,
    constant: Option<DMatrix<T>>,
}

impl<'a, T: Scalar> Generator<'a, T> {
    pub fn new(field: &'a CoefficientField, omega: &BasePoint) -> Result<Self> {
        if field.is_complex() && !T::IS_COMPLEX {
            return Err(Error::InvalidArgument("complex field propagated with a real scalar type".into()));
        }
        if omega.dim() != field.flow().dim() {
            return Err(Error::InvalidArgument("base point dimension does not match the flow".into()));
        }
        let constant = if field.flow().is_autonomous() { Some(field.eval_h::<T>(omega)?) } else { None };
        Ok(Generator { field, omega: omega.clone(), constant })
    }

    pub fn h(&self, t: f64) -> DMatrix<T> {
        match &self.constant {
            Some(h) => h.clone(),
            None => self.field.eval_h_unchecked(&self.field.flow().advance(&self.omega, t)),
        }
    }

    pub fn apply(&self, t: f64, y: &DMatrix<T>) -> DMatrix<T> {
        match &self.constant {
            Some(h) => h * y,
            None => self.h(t) * y,
        }
    }
}

pub fn integrator(tol: f64) -> Result<Dop853> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(Dop853::with_tol(tol))
}

/// Solution at `t1` of the system through `y0` at time `t0`.
pub fn solve<T: Scalar>(field: &CoefficientField, omega: &BasePoint, t0: f64, y0: DMatrix<T>, t1: f64, tol: f64) -> Result<DMatrix<T>> {
    let g = Generator::<T>::new(field, omega)?;
    let sol = integrator(tol)?.integrate(|t, y| g.apply(t, y), t0, y0, t1, |_, _| StepAction::Continue)?;
    Ok(sol.y)
}

#[derive(Debug, Clone, Serialize)]
pub struct CocycleValue<T: Scalar> {
    pub u: DMatrix<T>,
    pub t: f64,
    pub omega: BasePoint,
    pub symplectic_defect: f64,
    pub degraded: bool,
}

impl<T: Scalar> CocycleValue<T> {
    fn block(&self, r: usize, c: usize) -> DMatrix<T> {
        let n = self.u.nrows() / 2;
        self.u.view((r * n, c * n), (n, n)).into_owned()
    }

    pub fn u1(&self) -> DMatrix<T> {
        self.block(0, 0)
    }

    pub fn u2(&self) -> DMatrix<T> {
        self.block(1, 0)
    }

    pub fn u3(&self) -> DMatrix<T> {
        self.block(0, 1)
    }

    pub fn u4(&self) -> DMatrix<T> {
        self.block(1, 1)
    }
}

/// `‖UᵀJU − J‖ / max(1, ‖U‖²)`.
///
/// Plain transposition is used for complex matrices too, since complex
/// symmetric H2, H3 keep `HᵀJ + JH = 0`.
pub fn symplectic_defect<T: Scalar>(u: &DMatrix<T>) -> f64 {
    let n = u.nrows() / 2;
    let j = linalg::j_matrix::<T>(n);
    let d = u.transpose() * &j * u - &j;
    linalg::spectral_norm(&d) / linalg::spectral_norm(u).powi(2).max(1.0)
}

pub fn fundamental_matrix<T: Scalar>(field: &CoefficientField, omega: &BasePoint, t: f64, tol: f64) -> Result<CocycleValue<T>> {
    let n2 = 2 * field.n();
    let u = solve(field, omega, 0.0, DMatrix::<T>::identity(n2, n2), t, tol)?;
    let symplectic_defect = symplectic_defect(&u);
    Ok(CocycleValue { u, t, omega: omega.clone(), symplectic_defect, degraded: symplectic_defect > DEFAULT_DEFECT_TOL })
}

/// A `2n x n` matrix of solutions, valued at time `t` along the orbit of `omega`.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionFrame<T: Scalar> {
    pub z: DMatrix<T>,
    pub t: f64,
    pub omega: BasePoint,
}

/// Frames whose smallest singular value falls below this are degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

impl<T: Scalar> SolutionFrame<T> {
    pub fn new(z: DMatrix<T>, t: f64, omega: BasePoint) -> Self {
        SolutionFrame { z, t, omega }
    }

    pub fn from_blocks(l1: &DMatrix<T>, l2: &DMatrix<T>, t: f64, omega: BasePoint) -> Self {
        Self::new(linalg::stack(l1, l2), t, omega)
    }

    pub fn l1(&self) -> DMatrix<T> {
        linalg::top_block(&self.z)
    }

    pub fn l2(&self) -> DMatrix<T> {
        linalg::bottom_block(&self.z)
    }

    pub fn is_degenerate(&self) -> bool {
        let s = linalg::singular_values(&self.z);
        s.last().copied().unwrap_or(0.0) <= DEGENERACY_THRESHOLD * s.first().copied().unwrap_or(0.0).max(1.0)
    }

    /// `‖L1ᵀL2 − L2ᵀL1‖ / max(1, ‖Z‖²)`.
    pub fn lagrange_defect(&self) -> f64 {
        let (l1, l2) = (self.l1(), self.l2());
        let d = l1.transpose() * &l2 - l2.transpose() * &l1;
        linalg::spectral_norm(&d) / linalg::spectral_norm(&self.z).powi(2).max(1.0)
    }

    /// `L2 L1⁻¹`, when the top block is invertible.
    pub fn graph(&self) -> Option<DMatrix<T>> {
        linalg::right_divide(&self.l2(), &self.l1())
    }
}

pub fn propagate_frame<T: Scalar>(field: &CoefficientField, frame: &SolutionFrame<T>, t: f64, tol: f64) -> Result<SolutionFrame<T>> {
    if frame.z.nrows() != 2 * field.n() {
        return Err(Error::InvalidArgument("frame has the wrong number of rows".into()));
    }
    if frame.is_degenerate() {
        return Err(Error::InvalidArgument("frame is rank deficient".into()));
    }
    let z = solve(field, &frame.omega, frame.t, frame.z.clone(), t, tol)?;
    Ok(SolutionFrame { z, t, omega: frame.omega.clone() })
}

/// Orthonormal frame after propagation, with the accumulated column growth.
#[derive(Debug, Clone)]
pub struct NormalizedFrame<T: Scalar> {
    pub q: DMatrix<T>,
    pub t: f64,
    /// Sum of `log R_ii` over all renormalizations, per column.
    pub log_growth: Vec<f64>,
    pub steps: usize,
    pub stopped: bool,
}

/// Propagates span(`z0`) from `t0` to `t1`, orthonormalizing after every
/// accepted step. The observer sees the new orthonormal frame and the
/// per-step `log R_ii`; it may ask for a retry or a stop.
pub fn propagate_normalized<T, O>(
    field: &CoefficientField,
    omega: &BasePoint,
    t0: f64,
    z0: &DMatrix<T>,
    t1: f64,
    tol: f64,
    mut observer: O,
) -> Result<NormalizedFrame<T>>
where
    T: Scalar,
    O: FnMut(f64, &DMatrix<T>, &[f64]) -> StepAction,
{
    let g = Generator::<T>::new(field, omega)?;
    let mut q0 = z0.clone();
    let mut log_growth = linalg::orthonormalize(&mut q0);
    if log_growth.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("initial frame is rank deficient".into()));
    }
    let sol = integrator(tol)?.integrate(
        |t, y| g.apply(t, y),
        t0,
        q0,
        t1,
        |t, y| {
            let mut q = y.clone();
            let logs = linalg::orthonormalize(&mut q);
            let action = observer(t, &q, &logs);
            if action != StepAction::Retry {
                *y = q;
                for (acc, l) in log_growth.iter_mut().zip(&logs) {
                    *acc += l;
                }
            }
            match action {
                StepAction::Continue | StepAction::Modified => StepAction::Modified,
                other => other,
            }
        },
    )?;
    Ok(NormalizedFrame { q: sol.y, t: sol.t, log_growth, steps: sol.steps, stopped: sol.stopped })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CocycleReport {
    /// `‖U(t+s,ω) − U(t,ω·s)U(s,ω)‖`
    pub absolute: f64,
    /// The same, divided by `max(1, ‖U(t,ω·s)‖‖U(s,ω)‖)`.
    pub relative: f64,
}

pub fn cocycle_check(field: &CoefficientField, omega: &BasePoint, s: f64, t: f64, tol: f64) -> Result<CocycleReport> {
    let u_ts = fundamental_matrix::<f64>(field, omega, t + s, tol)?.u;
    let u_s = fundamental_matrix::<f64>(field, omega, s, tol)?.u;
    let shifted = field.flow().advance(omega, s);
    let u_t = fundamental_matrix::<f64>(field, &shifted, t, tol)?.u;
    let absolute = linalg::spectral_norm(&(&u_ts - &u_t * &u_s));
    let scale = (linalg::spectral_norm(&u_t) * linalg::spectral_norm(&u_s)).max(1.0);
    Ok(CocycleReport { absolute, relative: absolute / scale })
}

/// `‖U(−t, ω·t) U(t, ω) − I‖`, relative to `‖U(−t, ω·t)‖‖U(t, ω)‖`.
pub fn time_reversal_defect(field: &CoefficientField, omega: &BasePoint, t: f64, tol: f64) -> Result<f64> {
    let fwd = fundamental_matrix::<f64>(field, omega, t, tol)?.u;
    let back = fundamental_matrix::<f64>(field, &field.flow().advance(omega, t), -t, tol)?.u;
    let n2 = fwd.nrows();
    let d = linalg::spectral_norm(&(&back * &fwd - DMatrix::identity(n2, n2)));
    Ok(d / (linalg::spectral_norm(&back) * linalg::spectral_norm(&fwd)).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(h: &[f64]) -> CoefficientField {
        CoefficientField::from_matrix(&DMatrix::from_row_slice(2, 2, h), None).unwrap()
    }

    #[test]
    fn identity_at_time_zero() {
        let f = constant(&[0.3, 1.0, 2.0, -0.3]);
        let u = fundamental_matrix::<f64>(&f, &f.flow().origin(), 0.0, 1e-10).unwrap();
        assert_eq!(u.u, DMatrix::identity(2, 2));
    }

    #[test]
    fn hyperbolic_and_rotation_closed_forms() {
        let f = constant(&[-1.0, 0.0, 0.0, 1.0]);
        let u = fundamental_matrix::<f64>(&f, &f.flow().origin(), 1.0, 1e-12).unwrap().u;
        let e = 1f64.exp();
        assert!((u[(0, 0)] - 1.0 / e).abs() < 1e-10 && (u[(1, 1)] - e).abs() < 1e-10);
        let r = constant(&[0.0, 1.0, -1.0, 0.0]);
        let u = fundamental_matrix::<f64>(&r, &r.flow().origin(), std::f64::consts::FRAC_PI_2, 1e-12).unwrap().u;
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(linalg::max_abs(&(u - expect)) < 1e-10);
    }

    #[test]
    fn frame_through_horizontal_plane() {
        let f = constant(&[-1.0, 0.0, 0.0, 1.0]);
        let fr = SolutionFrame::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), 0.0, f.flow().origin());
        let out = propagate_frame(&f, &fr, 1.0, 1e-12).unwrap();
        assert!((out.z[0] - (-1f64).exp()).abs() < 1e-10 && out.z[1].abs() < 1e-14);
        let same = propagate_frame(&f, &fr, 0.0, 1e-12).unwrap();
        assert_eq!(same.z, fr.z);
    }

    #[test]
    fn normalized_frame_tracks_growth() {
        let f = constant(&[-1.0, 0.0, 0.0, 1.0]);
        let z0 = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let nf = propagate_normalized(&f, &f.flow().origin(), 0.0, &z0, 50.0, 1e-10, |_, _, _| StepAction::Continue).unwrap();
        assert!((nf.log_growth[0] - 50.0).abs() < 1e-6);
        assert!(nf.q[0].abs() < 1e-20);
    }
}
