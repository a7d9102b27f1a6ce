use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid base flow: {0}")]
    InvalidFlow(String),

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at t = {t_reached}")]
    Stiffness { t_reached: f64 },

    #[error("Riccati solution escapes the chart at t = {t_escape}")]
    FiniteEscape { t_escape: f64 },

    #[error("no convergence up to T = {t_max} (last disagreement {residual:.3e})")]
    NoConvergence { t_max: f64, residual: f64 },

    #[error("nonoscillation failure: top block of the Lagrange frame is singular (sigma_min = {sigma_min:.3e})")]
    NcFailure { sigma_min: f64 },

    #[error("top block of the principal frame is not invertible (sigma_min = {sigma_min:.3e})")]
    NonInvertibleTopBlock { sigma_min: f64 },

    #[error("boundary limit diverges (extrapolants differ by {defect:.3e})")]
    DivergentLimit { defect: f64 },

    #[error("Herglotz sign violated: smallest eigenvalue of Im G is {min_eig:.3e}")]
    SignViolation { min_eig: f64 },

    #[error("argument unwrapping failed at t = {t}")]
    UnwrapFailure { t: f64 },

    #[error("control weight R is singular")]
    SingularR,

    #[error("LQ problem is not solvable: {0}")]
    NotSolvable(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
