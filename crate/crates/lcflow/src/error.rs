//! Error type shared across the crate.
//!
//! Errors split into two families: contract violations (bad arguments,
//! malformed configs) and runtime invariant violations detected while a
//! computation is in flight (loss of starshapedness, cone exits, rejected
//! steps). The CLI maps the first family to exit status 1 and the second
//! to exit status 2.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported grid: {0}")]
    UnsupportedGrid(String),

    #[error("resolution too small: {0}")]
    ResolutionTooSmall(String),

    #[error("field/grid mismatch: field has {field} values, grid has {grid} nodes")]
    FieldGridMismatch { field: usize, grid: usize },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("degenerate radius at node {node}: r = {r}")]
    DegenerateRadius { node: usize, r: f64 },

    #[error("radius {r} at node {node} exceeds the sinh/cosh overflow cap {cap}")]
    RadiusCap { node: usize, r: f64, cap: f64 },

    #[error("negative radius argument: r = {0}")]
    NegativeRadius(f64),

    #[error("starshapedness violated at node {node}: support function u = {u}")]
    NotStarshaped { node: usize, u: f64 },

    #[error("induced metric not positive definite at node {node}")]
    MetricNotSpd { node: usize },

    #[error("cone violation at node {node}: kappa = {kappa:?}")]
    ConeViolation { node: usize, kappa: Vec<f64> },

    #[error("asymmetric matrix: max |A - A^T| = {0}")]
    AsymmetricMatrix(f64),

    #[error("index out of range: {0}")]
    IndexRange(String),

    #[error("positivity violated at r = {at}: {what}")]
    PositivityViolated { at: f64, what: String },

    #[error("empty or invalid domain: {0}")]
    Domain(String),

    #[error("degenerate coefficient: k = 1 makes the weight equation singular")]
    DegenerateWeightOde,

    #[error("k = n unsupported in the k-th mean curvature inequality")]
    KEqualsN,

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("step size underflow after {halvings} halvings: {reason}")]
    StepUnderflow { halvings: u32, reason: String },

    #[error("time series too short: {0} records (need at least 3)")]
    SeriesTooShort(usize),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// CLI exit status for this error: 1 for usage/config contract errors,
    /// 2 for runtime invariant violations.
    pub fn exit_status(&self) -> i32 {
        use Error::*;
        match self {
            UnsupportedGrid(_) | ResolutionTooSmall(_) | FieldGridMismatch { .. }
            | IndexRange(_) | Domain(_) | DegenerateWeightOde | KEqualsN | Expr(_)
            | Config(_) | Io { .. } | NegativeRadius(_) | AsymmetricMatrix(_) => 1,
            _ => 2,
        }
    }
}
