//! Real matrix-valued trigonometric polynomials on the torus.
//!
//! A table is a sum of terms `cos(2π k·θ) C_k + sin(2π k·θ) S_k`; the
//! constant part is the term with `k = 0`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::base_flow::BasePoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub k: Vec<i64>,
    pub cos: DMatrix<f64>,
    pub sin: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigMatrix {
    rows: usize,
    cols: usize,
    dim: usize,
    terms: Vec<TrigTerm>,
}

impl TrigMatrix {
    pub fn constant(m: DMatrix<f64>, dim: usize) -> Self {
        let (rows, cols) = m.shape();
        TrigMatrix {
            rows,
            cols,
            dim,
            terms: vec![TrigTerm { k: vec![0; dim], cos: m, sin: DMatrix::zeros(rows, cols) }],
        }
    }

    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        TrigMatrix { rows, cols, dim, terms: Vec::new() }
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        Self::constant(DMatrix::identity(n, n), dim)
    }

    pub fn scalar(x: f64, dim: usize) -> Self {
        Self::constant(DMatrix::from_element(1, 1, x), dim)
    }

    pub fn from_terms(rows: usize, cols: usize, dim: usize, terms: Vec<TrigTerm>) -> Result<Self> {
        for t in &terms {
            if t.k.len() != dim {
                return Err(Error::InvalidCoefficients(format!(
                    "multi-index {:?} does not match torus dimension {dim}",
                    t.k
                )));
            }
            if t.cos.shape() != (rows, cols) || t.sin.shape() != (rows, cols) {
                return Err(Error::InvalidCoefficients(format!(
                    "trig term has shape {:?}/{:?}, expected ({rows}, {cols})",
                    t.cos.shape(),
                    t.sin.shape()
                )));
            }
        }
        Ok(TrigMatrix { rows, cols, dim, terms })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn torus_dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.k.iter().all(|&k| k == 0))
    }

    pub fn eval(&self, omega: &BasePoint) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for term in &self.terms {
            let phase: f64 = term.k.iter().zip(omega.coords()).map(|(&k, x)| k as f64 * x).sum::<f64>() * 2.0 * PI;
            if phase == 0.0 {
                out += &term.cos;
            } else {
                let (s, c) = phase.sin_cos();
                out += &term.cos * c + &term.sin * s;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        TrigMatrix {
            rows: self.cols,
            cols: self.rows,
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm { k: t.k.clone(), cos: t.cos.transpose(), sin: t.sin.transpose() })
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        TrigMatrix {
            rows: self.rows,
            cols: self.cols,
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm { k: t.k.clone(), cos: &t.cos * a, sin: &t.sin * a })
                .collect(),
        }
    }

    /// Sum of two tables (terms are concatenated, not merged).
    pub fn add(&self, other: &TrigMatrix) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        TrigMatrix { rows: self.rows, cols: self.cols, dim: self.dim, terms }
    }

    /// Same polynomial with coefficients re-embedded in a flow of dimension `dim`
    /// (only valid for constant tables).
    /// Pointwise matrix product, expanded by the product-to-sum formulas.
    pub fn mul(&self, other: &TrigMatrix) -> Result<Self> {
        if self.cols != other.rows || self.dim != other.dim {
            return Err(Error::InvalidCoefficients(format!(
                "cannot multiply {}x{} over T^{} by {}x{} over T^{}",
                self.rows, self.cols, self.dim, other.rows, other.cols, other.dim
            )));
        }
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                let cc = &a.cos * &b.cos;
                let ss = &a.sin * &b.sin;
                let cs = &a.cos * &b.sin;
                let sc = &a.sin * &b.cos;
                let sum: Vec<i64> = a.k.iter().zip(&b.k).map(|(x, y)| x + y).collect();
                let diff: Vec<i64> = a.k.iter().zip(&b.k).map(|(x, y)| x - y).collect();
                terms.push(TrigTerm { k: sum, cos: (&cc - &ss) * 0.5, sin: (&cs + &sc) * 0.5 });
                terms.push(TrigTerm { k: diff, cos: (cc + ss) * 0.5, sin: (sc - cs) * 0.5 });
            }
        }
        let mut out = TrigMatrix { rows: self.rows, cols: other.cols, dim: self.dim, terms };
        out.merge_terms();
        Ok(out)
    }

    /// Folds `k` and `−k` together and drops vanishing terms.
    fn merge_terms(&mut self) {
        let mut merged: Vec<TrigTerm> = Vec::new();
        for t in self.terms.drain(..) {
            let neg: Vec<i64> = t.k.iter().map(|x| -x).collect();
            let flip = t.k.iter().find(|&&x| x != 0).is_some_and(|&x| x < 0);
            let (k, cos, sin) = if flip { (neg, t.cos, -t.sin) } else { (t.k, t.cos, t.sin) };
            let sin = if k.iter().all(|&x| x == 0) { DMatrix::zeros(sin.nrows(), sin.ncols()) } else { sin };
            match merged.iter_mut().find(|m| m.k == k) {
                Some(m) => {
                    m.cos += cos;
                    m.sin += sin;
                }
                None => merged.push(TrigTerm { k, cos, sin }),
            }
        }
        merged.retain(|t| t.cos.iter().chain(t.sin.iter()).any(|x| *x != 0.0));
        self.terms = merged;
    }

    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        if self.dim == dim {
            return Ok(self.clone());
        }
        if !self.is_constant() {
            return Err(Error::InvalidCoefficients("cannot re-embed a nonconstant table".into()));
        }
        Ok(TrigMatrix {
            rows: self.rows,
            cols: self.cols,
            dim,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm { k: vec![0; dim], cos: t.cos.clone(), sin: t.sin.clone() })
                .collect(),
        })
    }

    pub fn to_json(&self) -> TrigJson {
        if self.is_constant() {
            let m = self.eval(&BasePoint::origin(self.dim));
            TrigJson::Constant(rows_of(&m))
        } else {
            TrigJson::Table(
                self.terms
                    .iter()
                    .map(|t| TrigEntryJson { k: t.k.clone(), cos: Some(rows_of(&t.cos)), sin: Some(rows_of(&t.sin)) })
                    .collect(),
            )
        }
    }

    pub fn from_json(j: &TrigJson, rows: usize, cols: usize, dim: usize) -> Result<Self> {
        match j {
            TrigJson::Constant(m) => Ok(Self::constant(matrix_from_rows(m, rows, cols)?, dim)),
            TrigJson::Table(entries) => {
                let mut terms = Vec::with_capacity(entries.len());
                for e in entries {
                    let cos = match &e.cos {
                        Some(m) => matrix_from_rows(m, rows, cols)?,
                        None => DMatrix::zeros(rows, cols),
                    };
                    let sin = match &e.sin {
                        Some(m) => matrix_from_rows(m, rows, cols)?,
                        None => DMatrix::zeros(rows, cols),
                    };
                    terms.push(TrigTerm { k: e.k.clone(), cos, sin });
                }
                Self::from_terms(rows, cols, dim, terms)
            }
        }
    }
}

/// Problem-file representation: a plain matrix, or a list of trig terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrigJson {
    Constant(Vec<Vec<f64>>),
    Table(Vec<TrigEntryJson>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigEntryJson {
    pub k: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin: Option<Vec<Vec<f64>>>,
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>], nr: usize, nc: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Schema(format!(
            "expected a {nr}x{nc} matrix, got {} rows of lengths {:?}",
            rows.len(),
            rows.iter().map(|r| r.len()).collect::<Vec<_>>()
        )));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}
