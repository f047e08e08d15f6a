use thiserror::Error;

use crate::metric::Classification;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at byte offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),

    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },

    #[error("point coordinate {coord} = {value} lies outside the domain of chart `{chart}`")]
    OutOfDomain {
        chart: String,
        coord: usize,
        value: f64,
    },

    #[error("metric of `{context}` is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite {
        context: String,
        point: Vec<f64>,
        min_eigenvalue: f64,
    },

    #[error("warping function `{field}` is not strictly positive at {point:?} (value {value:e})")]
    NonPositiveWarp {
        field: String,
        point: Vec<f64>,
        value: f64,
    },

    #[error("metric is not Riemannian here ({classification:?}, c^2 b1 b2 = {diagnostic})")]
    NotRiemannian {
        classification: Classification,
        diagnostic: f64,
    },

    #[error("frame construction is ill-conditioned: 1 - c^2 b A = {margin:e}")]
    DegenerateFrame { margin: f64 },

    #[error("closed-form classification disagrees with Cholesky: {0}")]
    Inconsistent(String),

    #[error("parallel-gradient hypothesis violated: |Hess f1| = {hessian_f1:e}, |Hess f2| = {hessian_f2:e}")]
    Hypothesis { hessian_f1: f64, hessian_f2: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} exceeds the supported maximum of {max}", max = crate::expr::MAX_VARS)]
    DimensionTooLarge(usize),

    #[error("operation requires variant {expected}")]
    WrongVariant { expected: &'static str },

    #[error("singular matrix")]
    Singular,

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
}

impl Error {
    pub(crate) fn domain(expr: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            expr: expr.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
