//! Structured column models `b(ζ) = r(f(ζ))` and full factorization models.

mod column;
mod dual;
mod expr;
mod factor;
mod horner;
mod parse;
mod transform;

use thiserror::Error;

pub use column::{ColumnModel, RationalRow};
pub use dual::DualVector;
pub use expr::{passes_pole_guard, BinOp, Builtin, EvalFault, ExpandError, Expr, Number, RatExpr};
pub use factor::{ASpec, Domain, FactorModel, ScalingDeclaration, StructuredA};
pub use horner::CompensatedPoly;
pub use parse::{parse_expr, parse_model, serialize_model};
pub use transform::{Primitive, Transform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: unknown primitive '{name}'")]
    UnknownPrimitive { line: usize, column: usize, name: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("pole guard failed at row {row}")]
    Pole { row: usize },
    #[error("transform coordinate f{coord} is singular at this point")]
    TransformSingular { coord: usize },
    #[error("row {row}: {source}")]
    Expand { row: usize, source: ExpandError },
    #[error("denominator of row {row} vanishes at every probe point")]
    DenominatorVanishes { row: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}
