use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{LmSettings, Tolerances};
use crate::model::{ColumnModel, Domain};
use crate::rng::{complex_gaussian, derive_seed, rng_for, Stream};
use crate::solve::{project_from, project_onto_range};
use crate::C64;

use super::CertifyError;

/// A probe residual above this after every start counts as a genuine miss.
pub const STUCK_RESIDUAL: f64 = 1e-4;
/// Scale factors closer than this to 1 are redrawn.
const MIN_LAMBDA_DISTANCE: f64 = 0.5;
const POINT_DRAWS: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingVerdict {
    Invariant,
    NotInvariant,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingTrial {
    pub lambda: C64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingProbe {
    pub verdict: ScalingVerdict,
    pub starts: usize,
    pub trials: Vec<ScalingTrial>,
}

/// Test `λ·Range(r) ⊆ Range(r)` by projecting `λ r(x)` back onto the range
/// for random `x` and `λ`. One LM run is warm-started at `x` itself, the
/// rest from random points. A clean probe is evidence, not proof.
pub fn scaling_probe(
    cm: &ColumnModel,
    seed: u64,
    trials: usize,
    starts: usize,
    settings: &LmSettings,
    tols: &Tolerances,
) -> Result<ScalingProbe, CertifyError> {
    if trials < 5 {
        return Err(CertifyError::InvalidArgument(format!("trials {trials} below 5")));
    }
    let r = cm.rational_part();
    let results: Vec<Option<ScalingTrial>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, Stream::Scaling, t as u64);
            let lambda = loop {
                let z = complex_gaussian(&mut rng) * 2.0;
                if (z - 1.0).norm() >= MIN_LAMBDA_DISTANCE && z.norm() > 0.1 {
                    break z;
                }
            };
            let mut point = None;
            for _ in 0..POINT_DRAWS {
                let x: Vec<C64> = (0..r.l()).map(|_| complex_gaussian(&mut rng)).collect();
                if let Ok(v) = r.eval_r(&x) {
                    if v.norm() > 0.0 {
                        point = Some((x, v));
                        break;
                    }
                }
            }
            let (x, v) = point?;
            let target = v * lambda;
            let warm = project_from(&r, &target, &x, Domain::Complex, settings).ok()?;
            let sub_seed = derive_seed(seed, Stream::Scaling, rng.random::<u64>());
            let cold = project_onto_range(&r, &target, sub_seed, starts, Domain::Complex, settings).ok()?;
            Some(ScalingTrial { lambda, residual: warm.residual.min(cold.residual) })
        })
        .collect();
    let failed_draws = results.iter().any(Option::is_none);
    let trials: Vec<ScalingTrial> = results.into_iter().flatten().collect();
    let verdict = if failed_draws || trials.is_empty() {
        ScalingVerdict::Inconclusive
    } else if trials.iter().all(|t| t.residual < tols.accept_tol) {
        ScalingVerdict::Invariant
    } else if trials.iter().any(|t| t.residual > STUCK_RESIDUAL) {
        ScalingVerdict::NotInvariant
    } else {
        ScalingVerdict::Inconclusive
    };
    Ok(ScalingProbe { verdict, starts: starts + 1, trials })
}
