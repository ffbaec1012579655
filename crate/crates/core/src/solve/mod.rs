//! Nonlinear least-squares machinery: projection onto `Range(b)`,
//! variable-projection fits of `Y ≈ A B(ζ)^T`, and decomposition matching.

mod empirical;
mod lm;
mod matching;
mod projection;
mod varpro;

use thiserror::Error;

use crate::model::{Domain, ModelError};
use crate::C64;

pub use empirical::{
    empirical_uniqueness_test, empirical_uniqueness_test_with_truth, EmpiricalReport, EmpiricalVerdict, RestartRecord,
    MIN_CONVERGED, MIN_RESTARTS,
};
pub use lm::{levenberg_marquardt, LmOutcome};
pub use matching::{match_decompositions, MatchResult};
pub use projection::{project_from, project_onto_range, Projection};
pub use varpro::{varpro_fit, varpro_fit_from, varpro_residual, Decomposition, VarproFit, VarproRun};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Packing of `count` points in `F^l` into real LM coordinates. Complex
/// coordinates use interleaved `(re, im)` pairs; real ones a single slot,
/// which is the same as freezing the imaginary part at zero.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    pub l: usize,
    pub count: usize,
    pub domain: Domain,
}

impl Layout {
    pub fn per_coord(&self) -> usize {
        match self.domain {
            Domain::Real => 1,
            Domain::Complex => 2,
        }
    }

    pub fn len(&self) -> usize {
        self.l * self.count * self.per_coord()
    }

    pub fn unpack(&self, theta: &[f64]) -> Vec<Vec<C64>> {
        let w = self.per_coord();
        (0..self.count)
            .map(|r| {
                (0..self.l)
                    .map(|j| {
                        let k = (r * self.l + j) * w;
                        match self.domain {
                            Domain::Real => C64::new(theta[k], 0.0),
                            Domain::Complex => C64::new(theta[k], theta[k + 1]),
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn pack(&self, zetas: &[Vec<C64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for z in zetas {
            for v in z {
                out.push(v.re);
                if self.domain == Domain::Complex {
                    out.push(v.im);
                }
            }
        }
        out
    }

    /// Complex multipliers of `∂/∂ζ` for each real coordinate of one entry.
    pub fn directions(&self) -> &'static [C64] {
        const REAL: [C64; 1] = [C64::new(1.0, 0.0)];
        const COMPLEX: [C64; 2] = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        match self.domain {
            Domain::Real => &REAL,
            Domain::Complex => &COMPLEX,
        }
    }
}
