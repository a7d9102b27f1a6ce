//! Coefficient fields `H = [[H1, H3], [H2, -H1ᵀ]]` over a base flow and the
//! parametric perturbation families built from them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::base_flow::{BaseFlow, BasePoint};
use crate::error::{Error, Result};
use crate::linalg::{self, block2};
use crate::scalar::Scalar;
use crate::trig::TrigMatrix;

const SYMMETRY_TOL: f64 = 1e-12;

/// Linear combination `Σ c_j T_j(ω)` of real trigonometric tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    terms: Vec<(Complex64, TrigMatrix)>,
}

impl Block {
    pub fn real(t: TrigMatrix) -> Self {
        Block { terms: vec![(Complex64::new(1.0, 0.0), t)] }
    }

    fn plus(&self, c: Complex64, t: TrigMatrix) -> Self {
        let mut terms = self.terms.clone();
        if c != Complex64::new(0.0, 0.0) {
            terms.push((c, t));
        }
        Block { terms }
    }

    fn transpose_neg(&self) -> Self {
        Block { terms: self.terms.iter().map(|(c, t)| (-c, t.transpose())).collect() }
    }

    pub fn is_complex(&self) -> bool {
        self.terms.iter().any(|(c, _)| c.im != 0.0)
    }

    /// The block as one real table, when all coefficients are real.
    pub fn real_table(&self, n: usize, dim: usize) -> Option<TrigMatrix> {
        if self.is_complex() {
            return None;
        }
        Some(self.terms.iter().fold(TrigMatrix::zeros(n, n, dim), |acc, (c, t)| acc.add(&t.scale(c.re))))
    }

    pub fn eval<T: Scalar>(&self, n: usize, omega: &BasePoint) -> DMatrix<T> {
        let mut out = DMatrix::<T>::zeros(n, n);
        for (c, t) in &self.terms {
            let m = t.eval(omega);
            let c = T::from_c64(*c);
            out.zip_apply(&m, |o, x| *o += c * T::from_real(x));
        }
        out
    }

    /// The real part `Σ Re(c_j) T_j`, used for declared-flag checks.
    fn eval_real(&self, n: usize, omega: &BasePoint) -> DMatrix<f64> {
        self.eval::<f64>(n, omega)
    }

    fn eval_c64(&self, n: usize, omega: &BasePoint) -> DMatrix<Complex64> {
        self.eval::<Complex64>(n, omega)
    }
}

/// Parameter values applied to a field, newest last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationTag {
    H3Type { lambda: Complex64 },
    H2Type { lambda: Complex64 },
    Regularized { eps: f64, non_regularizing: bool },
    GeneralGamma { gamma: Complex64 },
    Swapped,
}

/// Optional sign conditions declared in a problem file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredFlags {
    #[serde(default)]
    pub h3_psd: bool,
    #[serde(default)]
    pub delta_pd: bool,
    #[serde(default)]
    pub h2_pd: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    n: usize,
    flow: BaseFlow,
    h1: Block,
    h2: Block,
    h3: Block,
    delta: Option<TrigMatrix>,
    flags: DeclaredFlags,
    tags: Vec<PerturbationTag>,
}

/// Number of orbit points used when spot-checking symmetry and declared flags.
pub const VALIDATION_SAMPLES: usize = 64;

impl CoefficientField {
    pub fn new(
        flow: BaseFlow,
        h1: TrigMatrix,
        h2: TrigMatrix,
        h3: TrigMatrix,
        delta: Option<TrigMatrix>,
        flags: DeclaredFlags,
    ) -> Result<Self> {
        let n = h1.shape().0;
        for (name, t) in [("H1", &h1), ("H2", &h2), ("H3", &h3)].into_iter().chain(delta.iter().map(|d| ("Delta", d))) {
            if t.shape() != (n, n) {
                return Err(Error::InvalidCoefficients(format!("{name} has shape {:?}, expected ({n}, {n})", t.shape())));
            }
            if t.torus_dim() != flow.dim() {
                return Err(Error::InvalidCoefficients(format!(
                    "{name} is a table over a {}-torus, flow has dimension {}",
                    t.torus_dim(),
                    flow.dim()
                )));
            }
        }
        let field = CoefficientField {
            n,
            flow,
            h1: Block::real(h1),
            h2: Block::real(h2),
            h3: Block::real(h3),
            delta,
            flags,
            tags: Vec::new(),
        };
        field.validate()?;
        Ok(field)
    }

    /// Constant-coefficient field over the autonomous flow.
    pub fn constant(h1: DMatrix<f64>, h2: DMatrix<f64>, h3: DMatrix<f64>, delta: Option<DMatrix<f64>>) -> Result<Self> {
        Self::new(
            BaseFlow::autonomous(),
            TrigMatrix::constant(h1, 0),
            TrigMatrix::constant(h2, 0),
            TrigMatrix::constant(h3, 0),
            delta.map(|d| TrigMatrix::constant(d, 0)),
            DeclaredFlags::default(),
        )
    }

    /// Reads the blocks off an infinitesimally symplectic constant matrix.
    pub fn from_matrix(h: &DMatrix<f64>, delta: Option<DMatrix<f64>>) -> Result<Self> {
        let n = h.nrows() / 2;
        if h.shape() != (2 * n, 2 * n) {
            return Err(Error::InvalidCoefficients("Hamiltonian matrix must be 2n x 2n".into()));
        }
        let h1 = h.view((0, 0), (n, n)).into_owned();
        let h3 = h.view((0, n), (n, n)).into_owned();
        let h2 = h.view((n, 0), (n, n)).into_owned();
        let h4 = h.view((n, n), (n, n)).into_owned();
        if linalg::max_abs(&(h4 + h1.transpose())) > SYMMETRY_TOL {
            return Err(Error::InvalidCoefficients("lower-right block is not -H1ᵀ".into()));
        }
        Self::constant(h1, h2, h3, delta)
    }

    pub fn with_flags(mut self, flags: DeclaredFlags) -> Result<Self> {
        self.flags = flags;
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flow(&self) -> &BaseFlow {
        &self.flow
    }

    pub fn flags(&self) -> DeclaredFlags {
        self.flags
    }

    pub fn tags(&self) -> &[PerturbationTag] {
        &self.tags
    }

    /// `(H1, H2, H3)` as real tables.
    pub fn real_tables(&self) -> Option<(TrigMatrix, TrigMatrix, TrigMatrix)> {
        let d = self.flow.dim();
        Some((self.h1.real_table(self.n, d)?, self.h2.real_table(self.n, d)?, self.h3.real_table(self.n, d)?))
    }

    pub fn delta(&self) -> Option<&TrigMatrix> {
        self.delta.as_ref()
    }

    pub fn is_complex(&self) -> bool {
        self.h1.is_complex() || self.h2.is_complex() || self.h3.is_complex()
    }

    /// Spectral parameter of the latest H2- or H3-type perturbation, 0 if none.
    pub fn parameter(&self) -> Complex64 {
        self.tags
            .iter()
            .rev()
            .find_map(|t| match t {
                PerturbationTag::H3Type { lambda } | PerturbationTag::H2Type { lambda } => Some(*lambda),
                _ => None,
            })
            .unwrap_or_default()
    }

    /// Symmetry of H2, H3, Δ and the declared sign flags on the validation grid.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        for omega in self.flow.grid(VALIDATION_SAMPLES, 0.7548776662466927) {
            for (name, block) in [("H2", &self.h2), ("H3", &self.h3)] {
                let m = block.eval_c64(n, &omega);
                let scale = linalg::max_abs(&m).max(1.0);
                if linalg::symmetry_defect(&m) > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidCoefficients(format!("{name} is not symmetric")));
                }
            }
            if let Some(d) = &self.delta {
                let m = d.eval(&omega);
                if linalg::symmetry_defect(&m) > SYMMETRY_TOL * linalg::max_abs(&m).max(1.0) {
                    return Err(Error::InvalidCoefficients("Delta is not symmetric".into()));
                }
                if self.flags.delta_pd && linalg::min_eigenvalue(&m) <= 0.0 {
                    return Err(Error::InvalidCoefficients("Delta declared positive definite but is not".into()));
                }
            } else if self.flags.delta_pd {
                return Err(Error::InvalidCoefficients("Delta declared positive definite but absent".into()));
            }
            if self.flags.h3_psd && linalg::min_eigenvalue(&self.h3.eval_real(n, &omega)) < -SYMMETRY_TOL {
                return Err(Error::InvalidCoefficients("H3 declared positive semidefinite but is not".into()));
            }
            if self.flags.h2_pd && linalg::min_eigenvalue(&self.h2.eval_real(n, &omega)) <= 0.0 {
                return Err(Error::InvalidCoefficients("H2 declared positive definite but is not".into()));
            }
        }
        Ok(())
    }

    pub fn h1<T: Scalar>(&self, omega: &BasePoint) -> DMatrix<T> {
        self.h1.eval(self.n, omega)
    }

    pub fn h2<T: Scalar>(&self, omega: &BasePoint) -> DMatrix<T> {
        self.h2.eval(self.n, omega)
    }

    pub fn h3<T: Scalar>(&self, omega: &BasePoint) -> DMatrix<T> {
        self.h3.eval(self.n, omega)
    }

    pub fn delta_at(&self, omega: &BasePoint) -> Option<DMatrix<f64>> {
        self.delta.as_ref().map(|d| d.eval(omega))
    }

    /// Assembled `H(ω)`. Errors when a complex field is evaluated over reals
    /// or when a symmetric block has drifted.
    pub fn eval_h<T: Scalar>(&self, omega: &BasePoint) -> Result<DMatrix<T>> {
        if self.is_complex() && !T::IS_COMPLEX {
            return Err(Error::InvalidArgument("complex field evaluated with a real scalar type".into()));
        }
        let h1 = self.h1::<T>(omega);
        let h2 = self.h2::<T>(omega);
        let h3 = self.h3::<T>(omega);
        for (name, m) in [("H2", &h2), ("H3", &h3)] {
            if linalg::symmetry_defect(m) > SYMMETRY_TOL * linalg::max_abs(m).max(1.0) {
                return Err(Error::InvalidCoefficients(format!("{name} is not symmetric at {:?}", omega.coords())));
            }
        }
        Ok(self.assemble(h1, h2, h3))
    }

    /// Assembly without the symmetry check, for the integrator's inner loop.
    pub fn eval_h_unchecked<T: Scalar>(&self, omega: &BasePoint) -> DMatrix<T> {
        self.assemble(self.h1::<T>(omega), self.h2::<T>(omega), self.h3::<T>(omega))
    }

    fn assemble<T: Scalar>(&self, h1: DMatrix<T>, h2: DMatrix<T>, h3: DMatrix<T>) -> DMatrix<T> {
        let h4 = -h1.transpose();
        block2(&h1, &h3, &h2, &h4)
    }

    fn require_delta(&self) -> Result<TrigMatrix> {
        self.delta.clone().ok_or_else(|| Error::InvalidArgument("perturbation needs Delta".into()))
    }

    fn with_tag(mut self, tag: PerturbationTag) -> Self {
        self.tags.push(tag);
        self
    }

    /// `H3 + λΔ`.
    pub fn perturb_h3(&self, lambda: Complex64) -> Result<Self> {
        let delta = self.require_delta()?;
        let mut f = self.clone();
        f.h3 = f.h3.plus(lambda, delta);
        Ok(f.with_tag(PerturbationTag::H3Type { lambda }))
    }

    /// `H2 − λΔ`.
    pub fn perturb_h2(&self, lambda: Complex64) -> Result<Self> {
        let delta = self.require_delta()?;
        let mut f = self.clone();
        f.h2 = f.h2.plus(-lambda, delta);
        Ok(f.with_tag(PerturbationTag::H2Type { lambda }))
    }

    /// `H3 + εI`.
    pub fn regularize(&self, eps: f64) -> Self {
        let mut f = self.clone();
        f.h3 = f.h3.plus(Complex64::new(eps, 0.0), TrigMatrix::identity(self.n, self.flow.dim()));
        f.with_tag(PerturbationTag::Regularized { eps, non_regularizing: eps < 0.0 })
    }

    /// Field of the system satisfied by `w = [[0, I], [I, 0]] z`.
    pub fn swap_variables(&self) -> Self {
        let mut f = self.clone();
        f.h1 = self.h1.transpose_neg();
        f.h2 = self.h3.clone();
        f.h3 = self.h2.clone();
        // an involution: drop a trailing Swapped tag instead of stacking two
        if matches!(f.tags.last(), Some(PerturbationTag::Swapped)) {
            f.tags.pop();
            f
        } else {
            f.with_tag(PerturbationTag::Swapped)
        }
    }

    /// `H + γ J⁻¹ Γ` for a symmetric `2n x 2n` table `Γ`, with `J = [[0, −I], [I, 0]]`.
    ///
    /// With `Γ = [[Γ11, Γ12], [Γ21, Γ22]]` this adds `γΓ21` to H1, `γΓ22` to H3
    /// and `−γΓ11` to H2.
    pub fn general_perturb(&self, gamma: Complex64, big_gamma: &TrigMatrix) -> Result<Self> {
        let n = self.n;
        if big_gamma.shape() != (2 * n, 2 * n) {
            return Err(Error::InvalidArgument("Gamma must be 2n x 2n".into()));
        }
        for omega in self.flow.grid(VALIDATION_SAMPLES, 0.7548776662466927) {
            let g = big_gamma.eval(&omega);
            if linalg::symmetry_defect(&g) > SYMMETRY_TOL * linalg::max_abs(&g).max(1.0) {
                return Err(Error::InvalidCoefficients("Gamma is not symmetric".into()));
            }
        }
        let sub = |r: usize, c: usize| -> Result<TrigMatrix> {
            let terms = big_gamma
                .terms()
                .iter()
                .map(|t| crate::trig::TrigTerm {
                    k: t.k.clone(),
                    cos: t.cos.view((r, c), (n, n)).into_owned(),
                    sin: t.sin.view((r, c), (n, n)).into_owned(),
                })
                .collect();
            TrigMatrix::from_terms(n, n, big_gamma.torus_dim(), terms)
        };
        let mut f = self.clone();
        f.h1 = f.h1.plus(gamma, sub(n, 0)?);
        f.h3 = f.h3.plus(gamma, sub(n, n)?);
        f.h2 = f.h2.plus(-gamma, sub(0, 0)?);
        Ok(f.with_tag(PerturbationTag::GeneralGamma { gamma }))
    }
}

/// Which block the spectral parameter enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// `H3 + λΔ`
    H3,
    /// `H2 − λΔ`
    H2,
}

/// One-parameter family of fields sharing a base field and Δ.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub base: CoefficientField,
    pub kind: FamilyKind,
}

impl Family {
    pub fn new(base: CoefficientField, kind: FamilyKind) -> Result<Self> {
        base.require_delta()?;
        Ok(Family { base, kind })
    }

    pub fn at(&self, lambda: Complex64) -> CoefficientField {
        let f = match self.kind {
            FamilyKind::H3 => self.base.perturb_h3(lambda),
            FamilyKind::H2 => self.base.perturb_h2(lambda),
        };
        f.expect("family base carries Delta")
    }

    pub fn at_real(&self, alpha: f64) -> CoefficientField {
        self.at(Complex64::new(alpha, 0.0))
    }

    /// The ε-regularized member `H3 + εI` of the real family at `α`.
    pub fn regularized(&self, alpha: f64, eps: f64) -> CoefficientField {
        self.at_real(alpha).regularize(eps)
    }
}
