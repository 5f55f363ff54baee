use thiserror::Error;

pub type Result<T> = std::result::Result<T, BiharmError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiharmError {
    #[error("t = {t} lies outside the domain [{a}, {b}]")]
    Domain { t: f64, a: f64, b: f64 },

    #[error("warping function is not positive at r = {r} (f = {value})")]
    NonPositiveWarp { r: f64, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible sizes: {0}")]
    Incompatible(String),

    #[error("t = {t} is too close to the boundary for a stencil of half-width {reach}")]
    StencilMargin { t: f64, reach: f64 },

    #[error("profile is not a critical point (gradient norm {grad_norm:e} > {tol:e})")]
    NotCritical { grad_norm: f64, tol: f64 },

    #[error("matrix is singular to working precision (pivot {pivot} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("eigensolve failed: {0}")]
    Eigen(String),

    #[error("no sign change of the derivative found in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}
