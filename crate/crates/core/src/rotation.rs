//! Rotation number by continuous tracking of `arg det(U1 − iU2)`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::base_flow::BasePoint;
use crate::error::{Error, Result};
use crate::hamiltonian::{Family, FamilyKind};
use crate::hamiltonian::CoefficientField;
use crate::linalg;
use crate::fmt_num;
use crate::ode::StepAction;
use crate::propagator::propagate_normalized;

pub const MAX_HALVINGS: usize = 20;
/// Horizon keeping a bounded argument offset below 4e-4 per unit time.
pub const DEFAULT_HORIZON: f64 = 4000.0;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RotationEstimate {
    /// Radians per unit time.
    pub value: f64,
    pub error_bar: f64,
    #[serde(rename = "T_used")]
    pub t_used: f64,
    pub unwrap_steps: usize,
}

/// `(1/T) arg det(U1(T,ω) − iU2(T,ω))` with the argument continued along
/// accepted steps. `error_bar` compares against the estimate at `T/2`.
pub fn rotation_number(field: &CoefficientField, omega: &BasePoint, t: f64, tol: f64) -> Result<RotationEstimate> {
    if field.is_complex() {
        return Err(Error::InvalidArgument("rotation number needs a real field".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument("rotation horizon must be positive".into()));
    }
    let n = field.n();
    let z0 = linalg::stack(&DMatrix::<f64>::identity(n, n), &DMatrix::zeros(n, n));
    let mut prev = linalg::det_top_minus_i_bottom(&z0);
    let mut arg = 0.0;
    let mut halvings = 0usize;
    let mut failed_at = None;
    let mut steps = 0usize;
    let mut midpoint: Option<(f64, f64)> = None;
    propagate_normalized(field, omega, 0.0, &z0, t, tol, |s, q, _| {
        let d: Complex64 = linalg::det_top_minus_i_bottom(q);
        let delta = (d / prev).arg();
        if delta.abs() >= FRAC_PI_2 {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                failed_at = Some(s);
                return StepAction::Stop;
            }
            return StepAction::Retry;
        }
        halvings = 0;
        arg += delta;
        prev = d;
        steps += 1;
        if midpoint.is_none() && s >= t / 2.0 {
            midpoint = Some((s, arg));
        }
        StepAction::Continue
    })?;
    if let Some(t) = failed_at {
        return Err(Error::UnwrapFailure { t });
    }
    let value = arg / t;
    let error_bar = match midpoint {
        Some((tm, am)) if tm > 0.0 && tm < t => (value - am / tm).abs(),
        _ => 0.0,
    };
    Ok(RotationEstimate { value, error_bar, t_used: t, unwrap_steps: steps })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProfileRow {
    pub alpha: f64,
    #[serde(flatten)]
    pub estimate: RotationEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationProfile {
    pub rows: Vec<ProfileRow>,
    /// Largest decrease between consecutive grid values.
    pub monotonicity_defect: f64,
    /// Every decrease stays within twice the larger error bar.
    pub monotone: bool,
}

impl RotationProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,value,error_bar,T_used\n");
        for r in &self.rows {
            let e = &r.estimate;
            s.push_str(&format!("{},{},{},{}\n", fmt_num(r.alpha), fmt_num(e.value), fmt_num(e.error_bar), fmt_num(e.t_used)));
        }
        s
    }
}

/// Rotation numbers of the real H2-type family over an increasing α grid.
pub fn rotation_profile(family: &Family, omega: &BasePoint, alphas: &[f64], t: f64, tol: f64) -> Result<RotationProfile> {
    if family.kind != FamilyKind::H2 {
        return Err(Error::InvalidArgument("rotation profiles are taken along the H2-type family".into()));
    }
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("alpha grid must be increasing".into()));
    }
    let rows: Vec<ProfileRow> = alphas
        .par_iter()
        .map(|&alpha| rotation_number(&family.at_real(alpha), omega, t, tol).map(|estimate| ProfileRow { alpha, estimate }))
        .collect::<Result<_>>()?;
    let mut defect: f64 = 0.0;
    let mut monotone = true;
    for w in rows.windows(2) {
        let drop = w[0].estimate.value - w[1].estimate.value;
        defect = defect.max(drop);
        if drop > 2.0 * w[0].estimate.error_bar.max(w[1].estimate.error_bar) + 1e-12 {
            monotone = false;
        }
    }
    Ok(RotationProfile { rows, monotonicity_defect: defect, monotone })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdCandidate {
    /// First and last grid values of a run with constant rotation number.
    pub lo: f64,
    pub hi: f64,
    /// Next grid value, where the profile changed (none at the window end).
    pub next: Option<f64>,
    /// The run starts at the first grid value, so it may extend further left.
    pub open_left: bool,
    pub value: f64,
}

/// Maximal runs of at least two grid points on which the rotation number
/// is constant within `max(2·error_bar, abs_tol)`.
pub fn ed_candidates_from_rotation(profile: &RotationProfile, abs_tol: f64) -> Vec<EdCandidate> {
    let rows = &profile.rows;
    let mut out = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j + 1 < rows.len() {
            let (a, b) = (&rows[i].estimate, &rows[j + 1].estimate);
            let tol = (2.0 * a.error_bar.max(b.error_bar)).max(abs_tol);
            if (a.value - b.value).abs() <= tol {
                j += 1;
            } else {
                break;
            }
        }
        if j > i {
            out.push(EdCandidate {
                lo: rows[i].alpha,
                hi: rows[j].alpha,
                next: rows.get(j + 1).map(|r| r.alpha),
                open_left: i == 0,
                value: rows[i].estimate.value,
            });
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(h: &[f64]) -> CoefficientField {
        CoefficientField::from_matrix(&DMatrix::from_row_slice(2, 2, h), Some(DMatrix::identity(1, 1))).unwrap()
    }

    #[test]
    fn harmonic_rotation_is_one() {
        let f = field(&[0.0, 1.0, -1.0, 0.0]);
        let r = rotation_number(&f, &f.flow().origin(), 4000.0, 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn hyperbolic_rotation_vanishes() {
        let f = field(&[-1.0, 0.0, -3.0, 1.0]);
        let r = rotation_number(&f, &f.flow().origin(), 4000.0, 1e-10).unwrap();
        assert!(r.value.abs() < 1e-3, "{r:?}");
    }

    fn synthetic(values: &[f64]) -> RotationProfile {
        RotationProfile {
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &v)| ProfileRow { alpha: i as f64, estimate: RotationEstimate { value: v, error_bar: 0.0, t_used: 1.0, unwrap_steps: 1 } })
                .collect(),
            monotonicity_defect: 0.0,
            monotone: true,
        }
    }

    #[test]
    fn candidates_from_synthetic_profiles() {
        assert!(ed_candidates_from_rotation(&synthetic(&[0.0, 1.0, 2.0, 3.0]), 1e-6).is_empty());
        let all = ed_candidates_from_rotation(&synthetic(&[0.5; 5]), 1e-6);
        assert_eq!(all.len(), 1);
        assert_eq!((all[0].lo, all[0].hi, all[0].next, all[0].open_left), (0.0, 4.0, None, true));
    }
}
