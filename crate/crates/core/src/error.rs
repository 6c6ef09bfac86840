use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error {0}")]
    Parse(#[from] ParseError),
    #[error("domain error: {0}")]
    Domain(#[from] EvalError),
    #[error("point {point:?} lies outside the field's region")]
    OutOfRegion { point: [f64; 4] },
    #[error("derivative order {order} exceeds the configured maximum {max}")]
    OrderExceeded { order: usize, max: usize },
    #[error("degenerate gradient at {point:?} (|dr| = {norm:e})")]
    DegenerateGradient { point: [f64; 4], norm: f64 },
    #[error("point {point:?} is off the boundary (r = {value:e}, tolerance {tol:e})")]
    OffBoundary { point: [f64; 4], value: f64, tol: f64 },
    #[error("projection from {start:?} did not converge in {iterations} iterations (last |r| = {residual:e})")]
    ProjectionFailed {
        start: [f64; 4],
        iterations: usize,
        residual: f64,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("strict type 4 violated: B = {b:e} at {point:?}")]
    StrictType4Violation { point: [f64; 4], b: f64 },
    #[error("type exceeds 4: B = {b:e} at {point:?}")]
    TypeExceeds4 { point: [f64; 4], b: f64 },
    #[error("empty sample set")]
    EmptySamples,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unknown gallery id '{0}'")]
    UnknownGallery(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("curve leaves the boundary on the {branch} branch (|r| = {residual:e})")]
    CurveOffBoundary { branch: &'static str, residual: f64 },
    #[error("no C up to {c_max} makes the bent Hessian positive semi-definite (worst at {witness:?})")]
    RequiredCNotFound { c_max: f64, witness: [f64; 4] },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
