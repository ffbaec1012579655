//! Numerical thresholds shared by the rank estimators, the solvers and the
//! certification pipeline. Every report echoes the values it ran with.

use serde::{Deserialize, Serialize};

/// Default relative singular-value threshold for generic rank decisions.
pub const RANK_TOL: f64 = 1e-9;
/// Default relative residual below which a vector is accepted as a member of a range.
pub const ACCEPT_TOL: f64 = 1e-8;
/// Default relative per-term discrepancy for matching two decompositions.
pub const MATCH_TOL: f64 = 1e-6;
/// Relative guard `|q| > POLE_EPS (1 + |p|)` applied at every division.
pub const POLE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank_tol: f64,
    pub accept_tol: f64,
    pub match_tol: f64,
    pub pole_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rank_tol: RANK_TOL, accept_tol: ACCEPT_TOL, match_tol: MATCH_TOL, pole_eps: POLE_EPS }
    }
}

/// Levenberg–Marquardt damping schedule and stopping rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmSettings {
    /// Initial damping is `initial_damping * trace(JᵀJ) / dim`.
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    pub gradient_tol: f64,
    pub max_iterations: usize,
    /// Consecutive rejected damping retries before a run is declared stalled.
    pub max_retries: usize,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            initial_damping: 1e-3,
            damping_increase: 2.0,
            damping_decrease: 1.0 / 3.0,
            gradient_tol: 1e-10,
            max_iterations: 200,
            max_retries: 60,
        }
    }
}
