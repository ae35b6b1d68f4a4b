use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spinor is not unit length (|psi|^2 = {norm_sq})")]
    NotUnit { norm_sq: f64 },

    #[error("spinor pair violates |U|^2 + u^2 = 1 (residual {residual:e})")]
    PairConstraint { residual: f64 },

    #[error("point outside the chart u > 0 (u = {u})")]
    OutsideChart { u: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("|U| = {norm} exceeds the clamp radius {clamp}")]
    ChartExit { norm: f64, clamp: f64 },

    #[error("three-form is not compatible with the flat metric (metric deviation {deviation:e})")]
    IncompatibleForm { deviation: f64 },

    #[error("time step {dt:e} exceeds the parabolic stability bound {bound:e}")]
    TimeStep { dt: f64, bound: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("background is not a critical point: |div T|/|T| = {residual:e} > {tolerance:e}")]
    NotCritical { residual: f64, tolerance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("invalid parameters for {strategy}: {message}")]
    Params { strategy: String, message: String },

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("field format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
