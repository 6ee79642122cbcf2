use thiserror::Error;

/// Errors raised by the model, the integrator and the search pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular input: {what} (distance {distance:e})")]
    Singular { what: &'static str, distance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root finding failed on [{lo}, {hi}]: {reason}")]
    RootFinding { lo: f64, hi: f64, reason: String },

    #[error("Jacobi energy {jacobi} is not below the first critical value {critical}")]
    AboveCritical { jacobi: f64, critical: f64 },

    #[error("state lies on the collision fiber; the physical momentum is unbounded")]
    AtCollision,

    #[error("chart transition is undefined at the pole a = 0")]
    PoleTransition,

    #[error("start energetically forbidden at s = {s} (discriminant {discriminant:e})")]
    Forbidden { s: f64, discriminant: f64 },

    #[error("s = {s} lies outside the admissible axis interval [{lo}, {hi}]")]
    OutsideHill { s: f64, lo: f64, hi: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("close approach to O in the physical flow at t = {t} (|q| = {r:e}); use the regularized flow")]
    UseRegularized { t: f64, r: f64 },

    #[error("bisection stagnated on [{lo}, {hi}]: {reason}")]
    Stagnation { lo: f64, hi: f64, reason: String },

    #[error("tangential root near s = {s} (|m| = {miss:e}); no sign change to bisect")]
    TangentialRoot { s: f64, miss: f64 },

    #[error("pericenter {index} before the target passes within {r:e} of O; the chord is a concatenation")]
    IntermediateCollision { index: usize, r: f64 },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
