//! Monte Carlo estimates of the generic ranks used by the checklist.

use nalgebra::SVD;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{ASpec, ColumnModel, FactorModel, ModelError};
use crate::rng::{complex_gaussian, gaussian_vec, rng_for, Stream, SECOND_BATCH_OFFSET};
use crate::{CMatrix, C64};

/// Draws per sample point before the point is given up as a pole hit.
const DRAWS_PER_POINT: usize = 10;
const RUIZ_SWEEPS: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumRankError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("sampling exhausted: {rejected} of {drawn} draws hit poles")]
    SamplingExhausted { rejected: usize, drawn: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Outcome of one seeded rank estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankEvidence {
    pub estimate: usize,
    /// `σ_{k+1}/σ_1` just below the accepted rank (0 when the rank is full).
    pub gap: f64,
    /// Smallest retained relative singular value `σ_k/σ_1`.
    pub retained: f64,
    pub samples: usize,
    pub seed: u64,
    /// Estimates from the primary and the second, offset-seed batch.
    pub batch_estimates: [usize; 2],
    pub agreement: bool,
    /// Per-trial ranks, when the estimate is a maximum over trials.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trial_ranks: Vec<usize>,
    pub rejected_draws: usize,
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn check_finite(m: &CMatrix) -> Result<(), NumRankError> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(NumRankError::NonFinite)
    }
}

fn check_tol(tol: f64) -> Result<(), NumRankError> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(NumRankError::InvalidArgument(format!("tolerance {tol} not in (0,1)")))
    }
}

fn rank_of(s: &[f64], tol: f64) -> usize {
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&v| v > tol * s1).count(),
        _ => 0,
    }
}

/// Number of singular values above `tol·σ_1`.
pub fn numeric_rank(m: &CMatrix, tol: f64) -> Result<usize, NumRankError> {
    check_tol(tol)?;
    check_finite(m)?;
    Ok(rank_of(&singular_values(m), tol))
}

/// Ruiz equilibration: alternately rescale rows and columns to unit
/// infinity norm. Nonzero diagonal scalings leave the rank unchanged but
/// remove the spread between rows like `x^1` and `x^20`.
pub fn equilibrate(m: &CMatrix) -> CMatrix {
    let mut a = m.clone();
    for _ in 0..RUIZ_SWEEPS {
        let mut worst: f64 = 0.0;
        for i in 0..a.nrows() {
            let norm = a.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if norm > 0.0 {
                let s = 1.0 / norm.sqrt();
                a.row_mut(i).scale_mut(s);
                worst = worst.max((1.0 - norm).abs());
            }
        }
        for j in 0..a.ncols() {
            let norm = a.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if norm > 0.0 {
                let s = 1.0 / norm.sqrt();
                a.column_mut(j).scale_mut(s);
                worst = worst.max((1.0 - norm).abs());
            }
        }
        if worst < 1e-3 {
            break;
        }
    }
    a
}

struct Estimate {
    rank: usize,
    gap: f64,
    retained: f64,
}

fn estimate(m: &CMatrix, tol: f64) -> Result<Estimate, NumRankError> {
    check_finite(m)?;
    let s = singular_values(&equilibrate(m));
    let rank = rank_of(&s, tol);
    let s1 = s.first().copied().unwrap_or(0.0);
    let rel = |k: usize| if s1 > 0.0 { s.get(k).map_or(0.0, |v| v / s1) } else { 0.0 };
    Ok(Estimate { rank, gap: rel(rank), retained: if rank == 0 { 0.0 } else { rel(rank - 1) } })
}

/// Draw `count` complex Gaussian points in `ℂ^l` at which `f` succeeds.
/// Each point owns its own counter-derived stream, so the result does not
/// depend on scheduling.
fn sample_points<T, F>(seed: u64, stream: Stream, count: usize, l: usize, f: F) -> Result<(Vec<T>, usize), NumRankError>
where
    T: Send,
    F: Fn(&[C64]) -> Result<T, ModelError> + Sync,
{
    let results: Vec<(Option<T>, usize)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, stream, i as u64);
            let mut rejected = 0;
            for _ in 0..DRAWS_PER_POINT {
                let x: Vec<C64> = (0..l).map(|_| complex_gaussian(&mut rng)).collect();
                match f(&x) {
                    Ok(v) => return (Some(v), rejected),
                    Err(_) => rejected += 1,
                }
            }
            (None, rejected)
        })
        .collect();
    let rejected: usize = results.iter().map(|r| r.1).sum();
    let drawn = rejected + results.iter().filter(|r| r.0.is_some()).count();
    if results.iter().any(|r| r.0.is_none()) || rejected * 10 > drawn * 9 {
        return Err(NumRankError::SamplingExhausted { rejected, drawn });
    }
    Ok((results.into_iter().filter_map(|r| r.0).collect(), rejected))
}

fn span_batch(cm: &ColumnModel, seed: u64, batch: usize, tol: f64) -> Result<(Estimate, usize), NumRankError> {
    let (cols, rejected) = sample_points(seed, Stream::SpanSample, batch, cm.l(), |x| cm.eval_r(x))?;
    let m = CMatrix::from_columns(&cols);
    Ok((estimate(&m, tol)?, rejected))
}

/// Dimension `N̂` of `span(Range(r))` from `batch` random evaluations,
/// repeated on a second batch with seed `seed + 2^32`.
pub fn span_dimension(cm: &ColumnModel, seed: u64, batch: usize, tol: f64) -> Result<RankEvidence, NumRankError> {
    check_tol(tol)?;
    if batch < cm.n_rows() + 10 {
        return Err(NumRankError::InvalidArgument(format!("batch {batch} below N + 10 = {}", cm.n_rows() + 10)));
    }
    let (first, rej1) = span_batch(cm, seed, batch, tol)?;
    let (second, rej2) = span_batch(cm, seed.wrapping_add(SECOND_BATCH_OFFSET), batch, tol)?;
    Ok(RankEvidence {
        estimate: first.rank,
        gap: first.gap,
        retained: first.retained,
        samples: 2 * batch,
        seed,
        batch_estimates: [first.rank, second.rank],
        agreement: first.rank == second.rank,
        trial_ranks: Vec::new(),
        rejected_draws: rej1 + rej2,
    })
}

fn jacobian_batch(
    cm: &ColumnModel,
    seed: u64,
    trials: usize,
    tol: f64,
) -> Result<(Vec<Estimate>, usize), NumRankError> {
    let (jacs, rejected) = sample_points(seed, Stream::JacobianSample, trials, cm.l(), |x| cm.jacobian_r(x))?;
    let ests = jacs.iter().map(|j| estimate(j, tol)).collect::<Result<Vec<_>, _>>()?;
    Ok((ests, rejected))
}

fn best(ests: Vec<Estimate>) -> Estimate {
    ests.into_iter().max_by(|a, b| a.rank.cmp(&b.rank).then(b.gap.total_cmp(&a.gap))).expect("at least one trial")
}

/// Generic rank `l̂` of `J(r, x)`: the maximum numeric rank over `trials`
/// random points, checked against a second batch.
pub fn generic_jacobian_rank(
    cm: &ColumnModel,
    seed: u64,
    trials: usize,
    tol: f64,
) -> Result<RankEvidence, NumRankError> {
    check_tol(tol)?;
    if trials < 5 {
        return Err(NumRankError::InvalidArgument(format!("trials {trials} below 5")));
    }
    let (first, rej1) = jacobian_batch(cm, seed, trials, tol)?;
    let (second, rej2) = jacobian_batch(cm, seed.wrapping_add(SECOND_BATCH_OFFSET), trials, tol)?;
    let trial_ranks: Vec<usize> = first.iter().map(|e| e.rank).collect();
    let a = best(first);
    let b = best(second);
    Ok(RankEvidence {
        estimate: a.rank,
        gap: a.gap,
        retained: a.retained,
        samples: 2 * trials,
        seed,
        batch_estimates: [a.rank, b.rank],
        agreement: a.rank == b.rank,
        trial_ranks,
        rejected_draws: rej1 + rej2,
    })
}

fn sample_a(model: &FactorModel, seed: u64, trial: usize) -> Result<CMatrix, ModelError> {
    let mut rng = rng_for(seed, Stream::ARank, trial as u64);
    match model.a_spec() {
        ASpec::GenericDense => {
            let v = gaussian_vec(&mut rng, model.k() * model.r(), model.domain());
            Ok(CMatrix::from_vec(model.k(), model.r(), v))
        }
        ASpec::Structured(a) => a.eval(&gaussian_vec(&mut rng, a.params(), model.domain())),
    }
}

fn a_batch(model: &FactorModel, seed: u64, trials: usize, tol: f64) -> Result<(Vec<Estimate>, usize), NumRankError> {
    let results: Vec<Result<Option<Estimate>, NumRankError>> = (0..trials)
        .into_par_iter()
        .map(|t| match sample_a(model, seed, t) {
            Ok(a) => estimate(&a, tol).map(Some),
            Err(_) => Ok(None),
        })
        .collect();
    let mut ests = Vec::new();
    let mut rejected = 0;
    for r in results {
        match r? {
            Some(e) => ests.push(e),
            None => rejected += 1,
        }
    }
    if ests.is_empty() || rejected * 10 > trials * 9 {
        return Err(NumRankError::SamplingExhausted { rejected, drawn: trials });
    }
    Ok((ests, rejected))
}

/// Generic column rank of `A(z)`. The assumption holds when the estimate
/// equals `R`.
pub fn a_full_rank_probe(
    model: &FactorModel,
    seed: u64,
    trials: usize,
    tol: f64,
) -> Result<RankEvidence, NumRankError> {
    check_tol(tol)?;
    if trials < 3 {
        return Err(NumRankError::InvalidArgument(format!("trials {trials} below 3")));
    }
    let (first, rej1) = a_batch(model, seed, trials, tol)?;
    let (second, rej2) = a_batch(model, seed.wrapping_add(SECOND_BATCH_OFFSET), trials, tol)?;
    let trial_ranks: Vec<usize> = first.iter().map(|e| e.rank).collect();
    let a = best(first);
    let b = best(second);
    Ok(RankEvidence {
        estimate: a.rank,
        gap: a.gap,
        retained: a.retained,
        samples: 2 * trials,
        seed,
        batch_estimates: [a.rank, b.rank],
        agreement: a.rank == b.rank,
        trial_ranks,
        rejected_draws: rej1 + rej2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RANK_TOL;
    use crate::model::{parse_expr, Domain, ScalingDeclaration, Transform};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn w() -> CMatrix {
        CMatrix::from_row_slice(3, 3, &[c(1.0), c(0.0), c(1.0), c(0.0), c(1.0), c(-1.0), c(1.0), c(1.0), c(0.0)])
    }

    fn linear_model() -> ColumnModel {
        let rows = ["x1 + x3", "x2 - x3", "x1 + x2"].map(|s| parse_expr(s).unwrap()).to_vec();
        ColumnModel::from_rows(3, rows, Transform::identity(3)).unwrap()
    }

    #[test]
    fn rank_of_small_matrices() {
        assert_eq!(numeric_rank(&CMatrix::identity(3, 3), RANK_TOL).unwrap(), 3);
        assert_eq!(numeric_rank(&w(), RANK_TOL).unwrap(), 2);
        assert_eq!(numeric_rank(&CMatrix::zeros(4, 3), RANK_TOL).unwrap(), 0);
        let u = crate::CVector::from_vec(vec![c(1.0), C64::new(0.3, -2.0), c(4.0)]);
        let v = crate::CVector::from_vec(vec![C64::new(0.0, 1.0), c(-0.5)]);
        assert_eq!(numeric_rank(&(&u * v.transpose()), RANK_TOL).unwrap(), 1);
    }

    #[test]
    fn rank_rejects_bad_input() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert_eq!(numeric_rank(&m, RANK_TOL), Err(NumRankError::NonFinite));
        assert!(numeric_rank(&CMatrix::identity(2, 2), 1.5).is_err());
    }

    #[test]
    fn rank_is_scale_invariant() {
        let m = w();
        for s in [1e-200, 1e-8, 3.0, 1e150] {
            assert_eq!(numeric_rank(&(&m * C64::new(s, -s)), RANK_TOL).unwrap(), 2);
        }
    }

    #[test]
    fn equilibration_preserves_rank() {
        let mut m = CMatrix::from_fn(6, 4, |i, j| c((i as f64 + 1.0).powi(j as i32 + 1)));
        m.set_column(3, &(m.column(0) * c(2.0) - m.column(1)));
        let e = equilibrate(&m);
        assert_eq!(numeric_rank(&e, RANK_TOL).unwrap(), 3);
        for v in e.iter() {
            assert!(v.norm() <= 1.0 + 1e-2);
        }
    }

    #[test]
    fn linear_model_jacobian_rank() {
        let ev = generic_jacobian_rank(&linear_model(), 5, 8, RANK_TOL).unwrap();
        assert_eq!(ev.estimate, 2);
        assert!(ev.trial_ranks.iter().all(|&r| r == 2));
        assert!(ev.agreement);
        assert!(ev.gap < RANK_TOL);
    }

    #[test]
    fn span_of_geometric_rows() {
        let cm = ColumnModel::from_template(8, 2, parse_expr("x2*x1^n").unwrap(), Transform::identity(2)).unwrap();
        let ev = span_dimension(&cm, 11, 40, RANK_TOL).unwrap();
        assert_eq!(ev.estimate, 8);
        assert!(ev.agreement);
        let ones = ColumnModel::from_template(5, 1, parse_expr("1").unwrap(), Transform::identity(1)).unwrap();
        assert_eq!(span_dimension(&ones, 1, 15, RANK_TOL).unwrap().estimate, 1);
        assert!(span_dimension(&ones, 1, 14, RANK_TOL).is_err());
    }

    #[test]
    fn span_is_deterministic() {
        let cm =
            ColumnModel::from_template(6, 4, parse_expr("(x1 + x2*n)/(x3 + x4*n)").unwrap(), Transform::identity(4))
                .unwrap();
        let a = span_dimension(&cm, 99, 38, RANK_TOL).unwrap();
        let b = span_dimension(&cm, 99, 38, RANK_TOL).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_exhausted_on_poles() {
        // A guard this loose rejects essentially every draw.
        let cm = ColumnModel::from_template(3, 1, parse_expr("1/(1e-3*x1)").unwrap(), Transform::identity(1))
            .unwrap()
            .with_pole_eps(0.9);
        assert!(matches!(span_dimension(&cm, 0, 13, RANK_TOL), Err(NumRankError::SamplingExhausted { .. })));
    }

    #[test]
    fn a_probe_dense() {
        let cm = linear_model();
        let m = FactorModel::new(4, 2, Domain::Complex, ASpec::GenericDense, cm.clone(), ScalingDeclaration::Unknown)
            .unwrap();
        assert_eq!(a_full_rank_probe(&m, 3, 3, RANK_TOL).unwrap().estimate, 2);
        let m = FactorModel::new(2, 4, Domain::Real, ASpec::GenericDense, cm, ScalingDeclaration::Unknown).unwrap();
        let ev = a_full_rank_probe(&m, 3, 3, RANK_TOL).unwrap();
        assert_eq!(ev.estimate, 2);
        assert!(a_full_rank_probe(&m, 3, 2, RANK_TOL).is_err());
    }
}
