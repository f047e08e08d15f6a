//! Generalized warped product metrics on a product of two coordinate
//! charts: closed-form metric, cometric, connection, frames, Laplacians and
//! curvature, each checked against a generic coordinate oracle.

pub mod chart;
pub mod cli;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod frame;
pub mod laplacian;
mod linalg;
pub mod metric;
pub mod oracle;
pub mod population;
pub mod sample;

pub use chart::{Chart, ScalarField};
pub use curvature::Formulas;
pub use error::{Error, Result};
pub use expr::Expression;
pub use metric::{Classification, ProductPoint, Side, Variant, WarpSpec};
pub use oracle::{DerivativeMode, Oracle};
