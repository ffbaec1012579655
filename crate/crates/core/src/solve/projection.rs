use rayon::prelude::*;
use serde::Serialize;

use crate::config::LmSettings;
use crate::model::{ColumnModel, Domain};
use crate::rng::{gaussian_vec, rng_for, Stream};
use crate::{CMatrix, CVector, C64};

use super::lm::levenberg_marquardt;
use super::{Layout, SolveError};

/// Best point found by projecting a vector onto `Range(b)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Projection {
    pub zeta: Vec<C64>,
    /// `‖v − b(ζ)‖ / ‖v‖`; infinite when every start diverged.
    pub residual: f64,
    pub all_starts_diverged: bool,
    pub converged: bool,
    /// Index of the winning start.
    pub start: usize,
}

impl Projection {
    fn diverged(l: usize) -> Self {
        Self {
            zeta: vec![C64::new(0.0, 0.0); l],
            residual: f64::INFINITY,
            all_starts_diverged: true,
            converged: false,
            start: 0,
        }
    }
}

/// One LM run minimizing `‖v − b(ζ)‖/‖v‖` from `zeta0`.
pub fn project_from(
    cm: &ColumnModel,
    v: &CVector,
    zeta0: &[C64],
    domain: Domain,
    settings: &LmSettings,
) -> Result<Projection, SolveError> {
    check(cm, v)?;
    let scale = v.norm();
    let layout = Layout { l: cm.l(), count: 1, domain };
    let theta0 = layout.pack(&[zeta0.to_vec()]);
    let outcome = levenberg_marquardt(&theta0, settings, |theta| {
        let zeta = layout.unpack(theta).pop().expect("one point");
        let (b, jb) = cm.eval_b_with_jacobian(&zeta).ok()?;
        let r = (b - v).unscale(scale);
        let dirs = layout.directions();
        let mut j = CMatrix::zeros(v.len(), layout.len());
        for col in 0..cm.l() {
            for (d, &c) in dirs.iter().enumerate() {
                j.set_column(col * dirs.len() + d, &(jb.column(col) * c).unscale(scale));
            }
        }
        Some((r, j))
    });
    Ok(match outcome {
        Some(o) => Projection {
            zeta: layout.unpack(&o.theta).pop().expect("one point"),
            residual: o.residual,
            all_starts_diverged: false,
            converged: o.converged,
            start: 0,
        },
        None => Projection::diverged(cm.l()),
    })
}

fn check(cm: &ColumnModel, v: &CVector) -> Result<(), SolveError> {
    if v.len() != cm.n_rows() {
        return Err(SolveError::DimensionMismatch(format!(
            "vector has {} entries, model has N = {}",
            v.len(),
            cm.n_rows()
        )));
    }
    if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(SolveError::InvalidArgument("target vector is not finite".into()));
    }
    if v.norm() == 0.0 {
        return Err(SolveError::InvalidArgument("target vector is zero".into()));
    }
    Ok(())
}

/// Best of `starts` LM runs from seeded random points in `domain`.
pub fn project_onto_range(
    cm: &ColumnModel,
    v: &CVector,
    seed: u64,
    starts: usize,
    domain: Domain,
    settings: &LmSettings,
) -> Result<Projection, SolveError> {
    check(cm, v)?;
    if starts == 0 {
        return Err(SolveError::InvalidArgument("at least one start is required".into()));
    }
    let runs: Vec<Projection> = (0..starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_for(seed, Stream::Projection, s as u64);
            let zeta0 = gaussian_vec(&mut rng, cm.l(), domain);
            let mut p = project_from(cm, v, &zeta0, domain, settings).expect("validated above");
            p.start = s;
            p
        })
        .collect();
    Ok(runs
        .into_iter()
        .filter(|p| !p.all_starts_diverged)
        .min_by(|a, b| a.residual.total_cmp(&b.residual).then(a.start.cmp(&b.start)))
        .unwrap_or_else(|| Projection::diverged(cm.l())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_expr, Primitive, Transform};

    fn vandermonde(n: usize) -> ColumnModel {
        ColumnModel::from_template(
            n,
            1,
            parse_expr("x1^(n-1)").unwrap(),
            Transform::new(vec![Primitive::Exp(C64::new(0.0, 1.0))]),
        )
        .unwrap()
    }

    #[test]
    fn exact_member_is_recovered() {
        let cm =
            ColumnModel::from_template(6, 4, parse_expr("(x1 + x2*n)/(x3 + x4*n)").unwrap(), Transform::identity(4))
                .unwrap();
        let z0 = [C64::new(0.3, -1.0), C64::new(1.2, 0.4), C64::new(-0.7, 0.2), C64::new(0.5, 0.9)];
        let v = cm.eval_b(&z0).unwrap();
        let p = project_onto_range(&cm, &v, 7, 8, Domain::Complex, &LmSettings::default()).unwrap();
        assert!(p.residual < 1e-10, "{}", p.residual);
        let back = cm.eval_b(&p.zeta).unwrap();
        assert!((back - &v).norm() < 1e-9 * v.norm());
    }

    #[test]
    fn sum_of_two_columns_stays_away() {
        let cm = vandermonde(8);
        let b0 = cm.eval_b(&[C64::new(0.4, 0.0)]).unwrap();
        let b1 = cm.eval_b(&[C64::new(2.1, 0.0)]).unwrap();
        let v = b0 + b1;
        let p = project_onto_range(&cm, &v, 3, 20, Domain::Complex, &LmSettings::default()).unwrap();
        assert!(p.residual > 0.05, "{}", p.residual);
    }

    #[test]
    fn rejects_bad_targets() {
        let cm = vandermonde(4);
        let zero = CVector::zeros(4);
        assert!(project_onto_range(&cm, &zero, 0, 1, Domain::Complex, &LmSettings::default()).is_err());
        let short = CVector::from_element(3, C64::new(1.0, 0.0));
        assert!(project_onto_range(&cm, &short, 0, 1, Domain::Complex, &LmSettings::default()).is_err());
        let ones = CVector::from_element(4, C64::new(1.0, 0.0));
        assert!(project_onto_range(&cm, &ones, 0, 0, Domain::Complex, &LmSettings::default()).is_err());
    }
}
