//! Numerical toolkit for nonautonomous linear Hamiltonian systems
//! `z' = H(ω·t) z` over compact base flows.

pub mod base_flow;
pub mod dichotomy;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod lq_control;
pub mod ode;
pub mod param_scan;
pub mod presets;
pub mod problem;
pub mod propagator;
pub mod riccati_weyl;
pub mod rotation;
pub mod scalar;
pub mod trig;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Shortest round-trip form of `x`, in exponent notation outside `[1e-4, 1e15)`.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
