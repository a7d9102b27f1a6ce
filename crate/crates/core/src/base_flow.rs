//! Compact base flows: the one-point autonomous flow, periodic flows and
//! Kronecker flows on finite-dimensional tori.
//!
//! Base points are angle coordinates in `[0, 1)`. A periodic flow of period `P`
//! is the circle flow with frequency `1/P`; the invariant measure is always
//! normalized Lebesgue (Haar) measure on the torus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest integer order used by the default commensurability search.
pub const DEFAULT_RELATION_ORDER: i64 = 1000;

/// JSON descriptor of a base flow, as embedded in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FlowDescriptor {
    Autonomous,
    Periodic { period: f64 },
    Torus { nu: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FlowKind {
    Autonomous,
    Periodic { period: f64 },
    Torus { nu: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseFlow {
    kind: FlowKind,
    frequencies: Vec<f64>,
    incommensurate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePoint(Vec<f64>);

fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    // x.floor() can round r up to exactly 1.0 for tiny negative x
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl BasePoint {
    pub fn new(coords: Vec<f64>) -> Self {
        BasePoint(coords.into_iter().map(wrap).collect())
    }

    pub fn origin(dim: usize) -> Self {
        BasePoint(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Largest coordinate distance on the circle.
    pub fn circle_distance(&self, other: &BasePoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let d = (a - b).abs();
                d.min(1.0 - d)
            })
            .fold(0.0, f64::max)
    }
}

impl BaseFlow {
    pub fn autonomous() -> Self {
        BaseFlow { kind: FlowKind::Autonomous, frequencies: Vec::new(), incommensurate: true }
    }

    pub fn periodic(period: f64) -> Result<Self> {
        make_flow(&FlowDescriptor::Periodic { period })
    }

    pub fn torus(nu: Vec<f64>) -> Result<Self> {
        make_flow(&FlowDescriptor::Torus { nu })
    }

    pub fn kind(&self) -> &FlowKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.frequencies.len()
    }

    /// Angular velocities in cycles per unit time.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn is_autonomous(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn incommensurate(&self) -> bool {
        self.incommensurate
    }

    pub fn descriptor(&self) -> FlowDescriptor {
        match &self.kind {
            FlowKind::Autonomous => FlowDescriptor::Autonomous,
            FlowKind::Periodic { period } => FlowDescriptor::Periodic { period: *period },
            FlowKind::Torus { nu } => FlowDescriptor::Torus { nu: nu.clone() },
        }
    }

    pub fn origin(&self) -> BasePoint {
        BasePoint::origin(self.dim())
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<BasePoint> {
        if coords.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "base point has {} coordinates, flow dimension is {}",
                coords.len(),
                self.dim()
            )));
        }
        Ok(BasePoint::new(coords))
    }

    /// `ω·t`.
    pub fn advance(&self, omega: &BasePoint, t: f64) -> BasePoint {
        BasePoint(
            omega
                .0
                .iter()
                .zip(&self.frequencies)
                .map(|(x, nu)| wrap(x + t * nu))
                .collect(),
        )
    }

    /// `{ω0·(k dt)}` for `k = 0..count`.
    pub fn sample_orbit(&self, omega0: &BasePoint, count: usize, dt: f64) -> Result<Vec<BasePoint>> {
        if count == 0 || !(dt > 0.0) {
            return Err(Error::InvalidArgument("sample_orbit needs count >= 1 and dt > 0".into()));
        }
        Ok((0..count).map(|k| self.advance(omega0, k as f64 * dt)).collect())
    }

    /// Sample grid standing in for "all ω": a single point for autonomous
    /// flows, an orbit segment otherwise.
    pub fn grid(&self, count: usize, dt: f64) -> Vec<BasePoint> {
        if self.is_autonomous() {
            vec![self.origin()]
        } else {
            let start = self.origin();
            (0..count.max(1)).map(|k| self.advance(&start, k as f64 * dt)).collect()
        }
    }
}

/// Validates a descriptor and runs the small-integer relation search.
pub fn make_flow(spec: &FlowDescriptor) -> Result<BaseFlow> {
    make_flow_with_order(spec, DEFAULT_RELATION_ORDER)
}

pub fn make_flow_with_order(spec: &FlowDescriptor, order: i64) -> Result<BaseFlow> {
    match spec {
        FlowDescriptor::Autonomous => Ok(BaseFlow::autonomous()),
        FlowDescriptor::Periodic { period } => {
            if !(period.is_finite() && *period > 0.0) {
                return Err(Error::InvalidFlow(format!("period must be positive, got {period}")));
            }
            Ok(BaseFlow {
                kind: FlowKind::Periodic { period: *period },
                frequencies: vec![1.0 / period],
                incommensurate: true,
            })
        }
        FlowDescriptor::Torus { nu } => {
            if nu.is_empty() {
                return Err(Error::InvalidFlow("torus flow needs a nonempty frequency vector".into()));
            }
            if nu.iter().any(|x| !x.is_finite() || *x == 0.0) {
                return Err(Error::InvalidFlow("torus frequencies must be finite and nonzero".into()));
            }
            Ok(BaseFlow {
                kind: FlowKind::Torus { nu: nu.clone() },
                frequencies: nu.clone(),
                incommensurate: find_integer_relation(nu, order).is_none(),
            })
        }
    }
}

/// Exhaustive search for a nonzero `k` with `|k_i| <= order` and `k·ν ≈ 0`.
///
/// The last coordinate is solved for by rounding, so the cost is
/// `(2 order + 1)^(d-1)`.
pub fn find_integer_relation(nu: &[f64], order: i64) -> Option<Vec<i64>> {
    let d = nu.len();
    if d < 2 {
        return None;
    }
    let scale = nu.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let last = nu[d - 1];
    let mut k = vec![-order; d - 1];
    loop {
        if k.iter().any(|&x| x != 0) {
            let partial: f64 = k.iter().zip(nu).map(|(&ki, x)| ki as f64 * x).sum();
            let kd = (-partial / last).round();
            if kd.abs() <= order as f64 {
                let kd = kd as i64;
                let residual = partial + kd as f64 * last;
                let kmax = k.iter().map(|x| x.abs()).max().unwrap_or(0).max(kd.abs()) as f64;
                if residual.abs() <= 1e-9 * scale * kmax.max(1.0) {
                    let mut rel = k.clone();
                    rel.push(kd);
                    return Some(rel);
                }
            }
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == d - 1 {
                return None;
            }
            k[i] += 1;
            if k[i] > order {
                k[i] = -order;
                i += 1;
            } else {
                break;
            }
        }
    }
}
