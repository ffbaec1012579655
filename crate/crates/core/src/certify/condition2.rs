use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{LmSettings, Tolerances};
use crate::model::{ColumnModel, Domain};
use crate::rng::{complex_gaussian, derive_seed, rng_for, Stream};
use crate::solve::project_onto_range;
use crate::{CMatrix, CVector, C64};

use super::CertifyError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition2Trial {
    pub lambda: Vec<C64>,
    pub residual: f64,
    pub converged: bool,
    /// The combination is itself a multiple of one of the given columns.
    pub collinear_with_column: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Condition2Probe {
    pub trials: Vec<Condition2Trial>,
    pub violation_found: bool,
    pub note: &'static str,
}

const CLEAN_NOTE: &str = "no violation found; a clean probe is evidence, not proof";
const VIOLATION_NOTE: &str = "a combination with at least two nonzero weights lies in the range";

fn is_multiple_of_some_column(v: &CVector, b: &CMatrix, tol: f64) -> bool {
    b.column_iter().any(|col| {
        let nn = col.norm_squared();
        if nn == 0.0 {
            return false;
        }
        let c = col.dotc(v) / nn;
        (v - col * c).norm() <= tol * v.norm()
    })
}

/// Project `Σ λ_r b_r` onto `Range(b)`. At least two weights must be nonzero.
#[allow(clippy::too_many_arguments)]
pub fn probe_combination(
    b_points: &CMatrix,
    cm: &ColumnModel,
    lambda: &[C64],
    domain: Domain,
    seed: u64,
    starts: usize,
    settings: &LmSettings,
    tols: &Tolerances,
) -> Result<Condition2Trial, CertifyError> {
    if lambda.len() != b_points.ncols() || b_points.nrows() != cm.n_rows() {
        return Err(CertifyError::InvalidArgument("weights and columns disagree in size".into()));
    }
    if lambda.iter().filter(|z| z.norm() > 0.0).count() < 2 {
        return Err(CertifyError::InvalidArgument(
            "condition 2 concerns combinations with at least two nonzero weights".into(),
        ));
    }
    let v = b_points * CVector::from_column_slice(lambda);
    if v.norm() == 0.0 {
        return Ok(Condition2Trial {
            lambda: lambda.to_vec(),
            residual: 0.0,
            converged: true,
            collinear_with_column: false,
        });
    }
    let p = project_onto_range(cm, &v, seed, starts, domain, settings)?;
    Ok(Condition2Trial {
        lambda: lambda.to_vec(),
        residual: p.residual,
        converged: p.converged,
        collinear_with_column: is_multiple_of_some_column(&v, b_points, tols.accept_tol),
    })
}

/// Randomized search for a violation of "two or more nonzero weights ⇒
/// `Σ λ_r b_r ∉ Range(b)`". Each trial picks `k ∈ {2..R}` uniformly, a random
/// support of size `k`, and complex Gaussian weights on it.
#[allow(clippy::too_many_arguments)]
pub fn condition2_falsifier(
    b_points: &CMatrix,
    cm: &ColumnModel,
    domain: Domain,
    seed: u64,
    trials: usize,
    starts: usize,
    settings: &LmSettings,
    tols: &Tolerances,
) -> Result<Condition2Probe, CertifyError> {
    let r = b_points.ncols();
    if r < 2 {
        return Err(CertifyError::InvalidArgument("need at least two columns".into()));
    }
    let results: Vec<Result<Condition2Trial, CertifyError>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, Stream::Condition2, t as u64);
            let k = rng.random_range(2..=r);
            let mut lambda = vec![C64::new(0.0, 0.0); r];
            for idx in sample(&mut rng, r, k) {
                lambda[idx] = loop {
                    let z = complex_gaussian(&mut rng);
                    if z.norm() > 1e-3 {
                        break z;
                    }
                };
            }
            let sub_seed = derive_seed(seed, Stream::Condition2, rng.random::<u64>());
            probe_combination(b_points, cm, &lambda, domain, sub_seed, starts, settings, tols)
        })
        .collect();
    let trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let violation_found = trials.iter().any(|t| t.residual < tols.accept_tol);
    Ok(Condition2Probe { trials, violation_found, note: if violation_found { VIOLATION_NOTE } else { CLEAN_NOTE } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ACCEPT_TOL;
    use crate::model::{parse_expr, Primitive, Transform};

    #[test]
    fn single_nonzero_is_rejected() {
        let cm = ColumnModel::from_template(4, 2, parse_expr("x2*x1^n").unwrap(), Transform::identity(2)).unwrap();
        let b = CMatrix::from_columns(&[
            cm.eval_b(&[C64::new(0.5, 0.0), C64::new(1.0, 0.0)]).unwrap(),
            cm.eval_b(&[C64::new(1.5, 0.0), C64::new(1.0, 0.0)]).unwrap(),
        ]);
        let lam = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert!(probe_combination(
            &b,
            &cm,
            &lam,
            Domain::Complex,
            0,
            2,
            &LmSettings::default(),
            &Tolerances::default()
        )
        .is_err());
    }

    #[test]
    fn distinct_vandermonde_columns_are_clean() {
        let cm = ColumnModel::from_template(
            6,
            1,
            parse_expr("x1^(n-1)").unwrap(),
            Transform::new(vec![Primitive::Exp(C64::new(0.0, 1.0))]),
        )
        .unwrap();
        let b = CMatrix::from_columns(&[
            cm.eval_b(&[C64::new(0.7, 0.0)]).unwrap(),
            cm.eval_b(&[C64::new(2.3, 0.0)]).unwrap(),
        ]);
        let probe =
            condition2_falsifier(&b, &cm, Domain::Complex, 5, 50, 6, &LmSettings::default(), &Tolerances::default())
                .unwrap();
        assert!(!probe.violation_found);
    }

    #[test]
    fn duplicated_column_is_a_violation() {
        let cm = ColumnModel::from_template(5, 2, parse_expr("x2*x1^n").unwrap(), Transform::identity(2)).unwrap();
        let col = cm.eval_b(&[C64::new(0.8, 0.3), C64::new(1.2, 0.0)]).unwrap();
        let b = CMatrix::from_columns(&[col.clone(), col]);
        let lam = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let t = probe_combination(&b, &cm, &lam, Domain::Complex, 3, 8, &LmSettings::default(), &Tolerances::default())
            .unwrap();
        assert!(t.residual < ACCEPT_TOL);
        assert!(t.collinear_with_column);
        let probe =
            condition2_falsifier(&b, &cm, Domain::Complex, 3, 10, 8, &LmSettings::default(), &Tolerances::default())
                .unwrap();
        assert!(probe.violation_found);
    }
}
