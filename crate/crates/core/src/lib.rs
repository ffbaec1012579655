//! Generic uniqueness certification for structured matrix factorizations.
//!
//! A data matrix `Y = A B(z)^T` whose columns `b(ζ_r)` come from a known
//! parametric family `b(ζ) = r(f(ζ))` (rational rows `p_n/q_n` composed with
//! entrywise analytic transforms) is generically unique, up to permutation
//! and scaling of its rank-1 terms, when a short checklist of algebraic
//! conditions holds. This crate checks that list numerically:
//!
//! * [`model`] parses, evaluates and differentiates column models.
//! * [`numrank`] estimates the generic ranks the checklist needs.
//! * [`certify`] runs the checklist and reports a certified maximal `R`.
//! * [`solve`] holds the Levenberg–Marquardt machinery used to probe
//!   membership in `Range(b)` and to fit decompositions empirically.
//! * [`apps`] builds the joint-diagonalization and source-separation models,
//!   their closed-form bounds and the half-angle trigonometric identities.

pub mod apps;
pub mod certify;
pub mod config;
pub mod model;
pub mod numrank;
pub mod rng;
pub mod solve;

pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

pub use config::{LmSettings, Tolerances};
pub use model::{
    parse_model, serialize_model, ASpec, ColumnModel, Domain, Expr, FactorModel, ModelError, Primitive,
    ScalingDeclaration, Transform,
};
