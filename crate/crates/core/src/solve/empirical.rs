use serde::Serialize;

use crate::config::{LmSettings, Tolerances};
use crate::model::{ASpec, FactorModel};
use crate::numrank::numeric_rank;
use crate::rng::{gaussian_vec, rng_for, Stream};
use crate::{CMatrix, C64};

use super::matching::match_decompositions;
use super::varpro::{assemble_b, varpro_fit, varpro_fit_from, Decomposition, VarproRun};
use super::SolveError;

/// Minimum number of restarts for a meaningful verdict.
pub const MIN_RESTARTS: usize = 10;
/// Minimum number of converged fits for a verdict other than inconclusive.
pub const MIN_CONVERGED: usize = 3;
const TRUTH_DRAWS: u64 = 10;
/// Accepted fits are refined with the gradient tolerance scaled by this
/// factor before they are compared with the ground truth.
pub const POLISH_FACTOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmpiricalVerdict {
    ConsistentWithUniqueness,
    CounterexampleFound,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartRecord {
    pub start: usize,
    pub residual: f64,
    pub converged: bool,
    pub rank_deficient_b: bool,
    pub matched: Option<bool>,
    pub discrepancy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub seed: u64,
    pub restarts: usize,
    pub converged: usize,
    pub matched: usize,
    /// Fraction of converged fits that match the ground truth.
    pub match_fraction: Option<f64>,
    /// Ground truth is non-generic (its `B` is rank-deficient).
    pub degenerate: bool,
    pub verdict: EmpiricalVerdict,
    pub reason: String,
    pub truth_zetas: Vec<Vec<C64>>,
    pub records: Vec<RestartRecord>,
}

fn draw_truth(model: &FactorModel, seed: u64) -> Result<(CMatrix, Vec<Vec<C64>>), SolveError> {
    let mut last = None;
    for attempt in 0..TRUTH_DRAWS {
        let mut rng = rng_for(seed, Stream::GroundTruth, attempt);
        let a = match model.a_spec() {
            ASpec::GenericDense => {
                CMatrix::from_vec(model.k(), model.r(), gaussian_vec(&mut rng, model.k() * model.r(), model.domain()))
            }
            ASpec::Structured(s) => match s.eval(&gaussian_vec(&mut rng, s.params(), model.domain())) {
                Ok(a) => a,
                Err(e) => {
                    last = Some(e.into());
                    continue;
                }
            },
        };
        let zetas: Vec<Vec<C64>> = (0..model.r()).map(|_| gaussian_vec(&mut rng, model.l(), model.domain())).collect();
        match assemble_b(model.column(), &zetas) {
            Ok(_) => return Ok((a, zetas)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| SolveError::InvalidArgument("could not draw a ground truth".into())))
}

/// Terms of a fit that only just meets `accept_tol` can sit far from the
/// truth on ill-conditioned instances; refining it separates that from a
/// genuine second decomposition.
fn polished(
    y: &CMatrix,
    model: &FactorModel,
    run: VarproRun,
    polish: &LmSettings,
    tols: &Tolerances,
) -> Result<VarproRun, SolveError> {
    let Some(d) = run.decomposition.as_ref().filter(|_| run.residual < tols.accept_tol) else {
        return Ok(run);
    };
    Ok(match varpro_fit_from(y, model, &d.zetas, polish, tols.rank_tol)? {
        Some(better) if better.residual <= run.residual => {
            VarproRun { start: run.start, iterations: run.iterations + better.iterations, ..better }
        }
        _ => run,
    })
}

/// Draw a random ground truth, build `Y`, refit from `restarts` random
/// starts and check that every converged fit is the truth up to the
/// trivial indeterminacy.
pub fn empirical_uniqueness_test(
    model: &FactorModel,
    seed: u64,
    restarts: usize,
    settings: &LmSettings,
    tols: &Tolerances,
) -> Result<EmpiricalReport, SolveError> {
    let (a, zetas) = draw_truth(model, seed)?;
    empirical_uniqueness_test_with_truth(model, a, zetas, seed, restarts, settings, tols)
}

/// Same as [`empirical_uniqueness_test`] with a caller-supplied ground truth.
pub fn empirical_uniqueness_test_with_truth(
    model: &FactorModel,
    a: CMatrix,
    zetas: Vec<Vec<C64>>,
    seed: u64,
    restarts: usize,
    settings: &LmSettings,
    tols: &Tolerances,
) -> Result<EmpiricalReport, SolveError> {
    if model.r() > model.k() {
        return Err(SolveError::InvalidArgument(format!("R = {} exceeds K = {}", model.r(), model.k())));
    }
    let mut report = EmpiricalReport {
        seed,
        restarts,
        converged: 0,
        matched: 0,
        match_fraction: None,
        degenerate: false,
        verdict: EmpiricalVerdict::Inconclusive,
        reason: String::new(),
        truth_zetas: zetas.clone(),
        records: Vec::new(),
    };
    if restarts < MIN_RESTARTS {
        report.reason = format!("{restarts} restarts is below the minimum of {MIN_RESTARTS}");
        return Ok(report);
    }
    let b = assemble_b(model.column(), &zetas)?;
    let y = &a * b.transpose();
    let truth = Decomposition::new(&y, model.column(), a, zetas)?;
    report.degenerate = y.norm() == 0.0 || numeric_rank(&b, tols.rank_tol).map_or(true, |rk| rk < model.r());
    if y.norm() == 0.0 {
        report.reason = "ground truth produces Y = 0".into();
        return Ok(report);
    }

    let fit = varpro_fit(&y, model, seed, restarts, settings, tols.rank_tol)?;
    let polish = LmSettings { gradient_tol: settings.gradient_tol * POLISH_FACTOR, ..*settings };
    let mut runs = Vec::with_capacity(fit.runs.len());
    for run in fit.runs {
        runs.push(polished(&y, model, run, &polish, tols)?);
    }
    for run in &runs {
        let converged = run.decomposition.is_some() && !run.rank_deficient_b && run.residual < tols.accept_tol;
        let m = match (&run.decomposition, converged) {
            (Some(d), true) => Some(match_decompositions(&truth, d, tols.match_tol)?),
            _ => None,
        };
        report.records.push(RestartRecord {
            start: run.start,
            residual: run.residual,
            converged,
            rank_deficient_b: run.rank_deficient_b,
            matched: m.as_ref().map(|m| m.matched),
            discrepancy: m.as_ref().map(|m| m.discrepancy),
        });
    }
    report.converged = report.records.iter().filter(|r| r.converged).count();
    report.matched = report.records.iter().filter(|r| r.matched == Some(true)).count();
    if report.converged > 0 {
        report.match_fraction = Some(report.matched as f64 / report.converged as f64);
    }
    (report.verdict, report.reason) = if report.degenerate {
        (
            EmpiricalVerdict::Inconclusive,
            "ground truth is degenerate: B is rank-deficient, instance excluded from the verdict".into(),
        )
    } else if report.converged < MIN_CONVERGED {
        (EmpiricalVerdict::Inconclusive, format!("only {} of {} fits converged", report.converged, restarts))
    } else if report.matched == report.converged {
        (
            EmpiricalVerdict::ConsistentWithUniqueness,
            format!("all {} converged fits match the ground truth", report.converged),
        )
    } else {
        (
            EmpiricalVerdict::CounterexampleFound,
            format!(
                "{} of {} converged fits differ from the ground truth",
                report.converged - report.matched,
                report.converged
            ),
        )
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_expr, ColumnModel, Domain, ScalingDeclaration, Transform};

    fn exp_poly(n: usize, k: usize, r: usize) -> FactorModel {
        let cm = ColumnModel::from_template(n, 2, parse_expr("x2*x1^n").unwrap(), Transform::identity(2)).unwrap();
        FactorModel::new(k, r, Domain::Complex, ASpec::GenericDense, cm, ScalingDeclaration::DeclaredTrue).unwrap()
    }

    #[test]
    fn too_few_restarts_is_inconclusive() {
        let rep = empirical_uniqueness_test(&exp_poly(8, 4, 3), 1, 1, &LmSettings::default(), &Tolerances::default())
            .unwrap();
        assert_eq!(rep.verdict, EmpiricalVerdict::Inconclusive);
        assert!(rep.records.is_empty());
    }

    #[test]
    fn exp_poly_recovers() {
        let rep = empirical_uniqueness_test(&exp_poly(8, 4, 3), 2, 12, &LmSettings::default(), &Tolerances::default())
            .unwrap();
        assert_eq!(rep.verdict, EmpiricalVerdict::ConsistentWithUniqueness, "{rep:?}");
    }

    #[test]
    fn duplicated_generator_is_degenerate() {
        let model = exp_poly(8, 4, 2);
        let z = vec![C64::new(0.8, 0.3), C64::new(1.0, -0.2)];
        let a = CMatrix::from_fn(4, 2, |i, j| C64::new(1.0 + i as f64, j as f64 - 0.5));
        let rep = empirical_uniqueness_test_with_truth(
            &model,
            a,
            vec![z.clone(), z],
            3,
            10,
            &LmSettings::default(),
            &Tolerances::default(),
        )
        .unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.verdict, EmpiricalVerdict::Inconclusive);
    }
}
