//! Application models: joint diagonalization, source separation and the
//! half-angle trigonometric identities.

pub mod sobi;
pub mod sources;
pub mod trig;

use thiserror::Error;

use crate::model::ModelError;

pub use sobi::{
    alg_geom_bound, kron, sobi_bound, sobi_build, sobi_column, sobi_factors, sobi_model, sobi_model_tau1,
    sobi_reformulate, sobi_table, sobi_zeta, sobium_bound, vec_of, SobiInstance, SobiTable, EXPECTED_ALG_GEOM,
    EXPECTED_SOBIUM, EXPECTED_CHECKLIST, TABLE_SENSORS,
};
pub use sources::{
    example_model, example_signal, exp_poly_model, exp_poly_template, rational_hilbert_block, rational_model,
    rational_template, BoundedModel, EXAMPLE_TEMPLATE,
};
pub use trig::{
    cheb_p, identity_sweep, pythagorean_residual, tan_half_qr, IntPoly, SweepRow, TrigError, TrigRational, MAX_DEGREE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AppError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trig(#[from] TrigError),
}
