use nalgebra::SVD;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::LmSettings;
use crate::model::{ColumnModel, FactorModel};
use crate::numrank::numeric_rank;
use crate::rng::{gaussian_vec, rng_for, Stream};
use crate::{CMatrix, CVector, C64};

use super::lm::levenberg_marquardt;
use super::{Layout, SolveError};

/// `Y ≈ A B^T` with `B = [b(ζ_1) … b(ζ_R)]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    #[serde(skip)]
    pub a: CMatrix,
    pub zetas: Vec<Vec<C64>>,
    #[serde(skip)]
    pub b: CMatrix,
    /// `‖Y − A B^T‖_F / ‖Y‖_F`.
    pub residual: f64,
}

impl Decomposition {
    /// Assemble `B` from `zetas` and record the residual against `y`.
    pub fn new(y: &CMatrix, cm: &ColumnModel, a: CMatrix, zetas: Vec<Vec<C64>>) -> Result<Self, SolveError> {
        let b = assemble_b(cm, &zetas)?;
        if a.ncols() != b.ncols() || a.nrows() != y.nrows() || b.nrows() != y.ncols() {
            return Err(SolveError::DimensionMismatch(format!(
                "A is {}x{}, B is {}x{}, Y is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        let residual = (y - &a * b.transpose()).norm() / y.norm();
        Ok(Self { a, zetas, b, residual })
    }

    pub fn r(&self) -> usize {
        self.a.ncols()
    }

    /// Rank-1 term `a_r b_r^T`.
    pub fn term(&self, r: usize) -> CMatrix {
        self.a.column(r) * self.b.column(r).transpose()
    }

    pub fn reconstruct(&self) -> CMatrix {
        &self.a * self.b.transpose()
    }
}

/// Result of one variable-projection run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarproRun {
    pub start: usize,
    #[serde(skip)]
    pub decomposition: Option<Decomposition>,
    pub residual: f64,
    pub converged: bool,
    pub rank_deficient_b: bool,
    pub iterations: usize,
}

/// Multistart outcome. `best` ignores runs whose `B` is rank-deficient.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarproFit {
    #[serde(skip)]
    pub best: Option<Decomposition>,
    pub best_start: Option<usize>,
    pub runs: Vec<VarproRun>,
    pub all_starts_diverged: bool,
    pub rank_deficient_b: bool,
}

pub(crate) fn assemble_b(cm: &ColumnModel, zetas: &[Vec<C64>]) -> Result<CMatrix, SolveError> {
    let cols = zetas.iter().map(|z| cm.eval_b(z)).collect::<Result<Vec<CVector>, _>>()?;
    if cols.is_empty() {
        return Err(SolveError::InvalidArgument("no columns".into()));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Thin factors of `B` truncated at `tol`: `U` (N×k), `σ` and `V` (R×k).
struct Pinv {
    u: CMatrix,
    s: Vec<f64>,
    v: CMatrix,
}

impl Pinv {
    fn new(b: &CMatrix, tol: f64) -> Self {
        let svd = SVD::new(b.clone(), true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested V^T");
        let s1 = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > tol * s1 && s1 > 0.0).collect();
        let u = CMatrix::from_columns(&keep.iter().map(|&k| u.column(k).into_owned()).collect::<Vec<_>>());
        let v = CMatrix::from_columns(&keep.iter().map(|&k| vt.row(k).adjoint()).collect::<Vec<_>>());
        let s = keep.iter().map(|&k| svd.singular_values[k]).collect();
        Self { u, s, v }
    }

    /// `B^+ M`.
    fn apply(&self, m: &CMatrix) -> CMatrix {
        if self.s.is_empty() {
            return CMatrix::zeros(self.v.nrows(), m.ncols());
        }
        let mut t = self.u.adjoint() * m;
        for (k, s) in self.s.iter().enumerate() {
            t.row_mut(k).unscale_mut(*s);
        }
        &self.v * t
    }

    /// `(I − UUᴴ) M`.
    fn perp(&self, m: &CMatrix) -> CMatrix {
        if self.s.is_empty() {
            return m.clone();
        }
        m - &self.u * (self.u.adjoint() * m)
    }

    /// `(B^+)ᴴ = U Σ⁻¹ Vᴴ`, `N×R`.
    fn pinv_adjoint(&self) -> CMatrix {
        let mut us = self.u.clone();
        for (k, s) in self.s.iter().enumerate() {
            us.column_mut(k).unscale_mut(*s);
        }
        us * self.v.adjoint()
    }
}

/// `‖Y − Y (B^T)^+ B^T‖_F / ‖Y‖_F`, computed from scratch.
pub fn varpro_residual(y: &CMatrix, b: &CMatrix, tol: f64) -> f64 {
    let yt = y.transpose();
    let p = Pinv::new(b, tol);
    let a_t = p.apply(&yt);
    (y - (b * a_t).transpose()).norm() / y.norm()
}

fn check_inputs(y: &CMatrix, model: &FactorModel) -> Result<(), SolveError> {
    if model.r() > model.k() {
        return Err(SolveError::InvalidArgument(format!("R = {} exceeds K = {}", model.r(), model.k())));
    }
    if y.nrows() != model.k() || y.ncols() != model.n() {
        return Err(SolveError::DimensionMismatch(format!(
            "Y is {}x{}, model expects {}x{}",
            y.nrows(),
            y.ncols(),
            model.k(),
            model.n()
        )));
    }
    if y.norm() == 0.0 || !y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(SolveError::InvalidArgument("Y must be finite and nonzero".into()));
    }
    Ok(())
}

/// Normalized varpro residual and its Golub–Pereyra Jacobian with respect
/// to the packed real coordinates of the `ζ_r`.
pub(crate) fn residual_and_jacobian(
    y: &CMatrix,
    cm: &ColumnModel,
    layout: &Layout,
    theta: &[f64],
    tol: f64,
) -> Option<(CVector, CMatrix)> {
    let zetas = layout.unpack(theta);
    let (n, k, l) = (y.ncols(), y.nrows(), cm.l());
    let mut b = CMatrix::zeros(n, layout.count);
    let mut grads = Vec::with_capacity(layout.count);
    for (r, z) in zetas.iter().enumerate() {
        let (col, jac) = cm.eval_b_with_jacobian(z).ok()?;
        b.set_column(r, &col);
        grads.push(jac);
    }
    let scale = y.norm();
    let yt = y.transpose();
    let p = Pinv::new(&b, tol);
    let c = p.apply(&yt); // R×K, row r holds column r of A
    let rho = p.perp(&yt); // N×K
    let w = p.pinv_adjoint();
    let dirs = layout.directions();
    let mut jm = CMatrix::zeros(n * k, layout.len());
    for (r, jac) in grads.iter().enumerate() {
        let pg = p.perp(jac); // N×l
        let gh_rho = jac.adjoint() * &rho; // l×K
        for j in 0..l {
            for (d, &cd) in dirs.iter().enumerate() {
                let col = (r * l + j) * dirs.len() + d;
                for kk in 0..k {
                    let t1 = cd * c[(r, kk)];
                    let t2 = cd.conj() * gh_rho[(j, kk)];
                    for i in 0..n {
                        jm[(kk * n + i, col)] = -(t1 * pg[(i, j)] + t2 * w[(i, r)]) / scale;
                    }
                }
            }
        }
    }
    let resid = CVector::from_iterator(n * k, rho.iter().map(|z| z / scale));
    Some((resid, jm))
}

/// One LM run from `zetas0`.
pub fn varpro_fit_from(
    y: &CMatrix,
    model: &FactorModel,
    zetas0: &[Vec<C64>],
    settings: &LmSettings,
    rank_tol: f64,
) -> Result<Option<VarproRun>, SolveError> {
    check_inputs(y, model)?;
    if zetas0.len() != model.r() || zetas0.iter().any(|z| z.len() != model.l()) {
        return Err(SolveError::DimensionMismatch("starting point has the wrong shape".into()));
    }
    let cm = model.column();
    let layout = Layout { l: model.l(), count: model.r(), domain: model.domain() };
    let theta0 = layout.pack(zetas0);
    let Some(out) = levenberg_marquardt(&theta0, settings, |t| residual_and_jacobian(y, cm, &layout, t, rank_tol))
    else {
        return Ok(None);
    };
    let zetas = layout.unpack(&out.theta);
    let b = assemble_b(cm, &zetas)?;
    let a = Pinv::new(&b, rank_tol).apply(&y.transpose()).transpose();
    let rank_deficient = numeric_rank(&b, rank_tol).map_or(true, |rk| rk < model.r());
    let d = Decomposition::new(y, cm, a, zetas)?;
    Ok(Some(VarproRun {
        start: 0,
        residual: d.residual,
        decomposition: Some(d),
        converged: out.converged,
        rank_deficient_b: rank_deficient,
        iterations: out.iterations,
    }))
}

/// Multistart variable projection from seeded random `ζ` in the model's
/// domain. Starts run in parallel; the winner is the lowest residual, ties
/// broken by start index.
pub fn varpro_fit(
    y: &CMatrix,
    model: &FactorModel,
    seed: u64,
    starts: usize,
    settings: &LmSettings,
    rank_tol: f64,
) -> Result<VarproFit, SolveError> {
    check_inputs(y, model)?;
    if starts == 0 {
        return Err(SolveError::InvalidArgument("at least one start is required".into()));
    }
    let runs: Vec<Result<VarproRun, SolveError>> = (0..starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng_for(seed, Stream::VarproStart, s as u64);
            let z0: Vec<Vec<C64>> = (0..model.r()).map(|_| gaussian_vec(&mut rng, model.l(), model.domain())).collect();
            Ok(match varpro_fit_from(y, model, &z0, settings, rank_tol)? {
                Some(mut run) => {
                    run.start = s;
                    run
                }
                None => VarproRun {
                    start: s,
                    decomposition: None,
                    residual: f64::INFINITY,
                    converged: false,
                    rank_deficient_b: false,
                    iterations: 0,
                },
            })
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let best = runs
        .iter()
        .filter(|r| r.decomposition.is_some() && !r.rank_deficient_b)
        .min_by(|a, b| a.residual.total_cmp(&b.residual).then(a.start.cmp(&b.start)));
    Ok(VarproFit {
        best: best.and_then(|r| r.decomposition.clone()),
        best_start: best.map(|r| r.start),
        all_starts_diverged: runs.iter().all(|r| r.decomposition.is_none()),
        rank_deficient_b: runs.iter().any(|r| r.rank_deficient_b),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RANK_TOL;
    use crate::model::{parse_expr, ASpec, Domain, ScalingDeclaration, Transform};
    use crate::rng::complex_gaussian;
    use rand::SeedableRng;

    fn rational(n: usize, k: usize, r: usize) -> FactorModel {
        let cm =
            ColumnModel::from_template(n, 4, parse_expr("(x1 + x2*n)/(x3 + x4*n)").unwrap(), Transform::identity(4))
                .unwrap();
        FactorModel::new(k, r, Domain::Complex, ASpec::GenericDense, cm, ScalingDeclaration::DeclaredTrue).unwrap()
    }

    fn truth(model: &FactorModel, seed: u64) -> (CMatrix, Vec<Vec<C64>>, CMatrix) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(model.k(), model.r(), |_, _| complex_gaussian(&mut rng));
        let zetas: Vec<Vec<C64>> =
            (0..model.r()).map(|_| (0..model.l()).map(|_| complex_gaussian(&mut rng)).collect()).collect();
        let b = assemble_b(model.column(), &zetas).unwrap();
        let y = &a * b.transpose();
        (y, zetas, a)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let model = rational(7, 4, 2);
        let (y, zetas, _) = truth(&model, 1);
        let layout = Layout { l: 4, count: 2, domain: Domain::Complex };
        let mut theta = layout.pack(&zetas);
        for (k, t) in theta.iter_mut().enumerate() {
            *t += 0.1 * ((k as f64) * 0.7).sin();
        }
        let (_, j) = residual_and_jacobian(&y, model.column(), &layout, &theta, RANK_TOL).unwrap();
        let h = 1e-6;
        for p in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[p] += h;
            tm[p] -= h;
            let rp = residual_and_jacobian(&y, model.column(), &layout, &tp, RANK_TOL).unwrap().0;
            let rm = residual_and_jacobian(&y, model.column(), &layout, &tm, RANK_TOL).unwrap().0;
            let fd = (rp - rm) / C64::new(2.0 * h, 0.0);
            let err = (fd - j.column(p)).norm();
            assert!(err < 1e-6 * (1.0 + j.column(p).norm()), "coordinate {p}: {err}");
        }
    }

    #[test]
    fn truth_is_a_fixed_point() {
        let model = rational(8, 4, 2);
        let (y, zetas, _) = truth(&model, 2);
        let run = varpro_fit_from(&y, &model, &zetas, &LmSettings::default(), RANK_TOL).unwrap().unwrap();
        assert!(run.residual < 1e-10);
        assert!(!run.rank_deficient_b);
        let d = run.decomposition.unwrap();
        assert!((d.reconstruct() - &y).norm() < 1e-10 * y.norm());
    }

    #[test]
    fn residual_matches_recomputation() {
        let model = rational(12, 5, 2);
        let (y, _, _) = truth(&model, 3);
        let fit = varpro_fit(&y, &model, 5, 6, &LmSettings::default(), RANK_TOL).unwrap();
        let d = fit.best.unwrap();
        assert!((d.residual - varpro_residual(&y, &d.b, RANK_TOL)).abs() < 1e-12);
    }

    #[test]
    fn recovers_random_rational_instance() {
        let model = rational(12, 5, 2);
        let (y, _, _) = truth(&model, 4);
        let fit = varpro_fit(&y, &model, 9, 20, &LmSettings::default(), RANK_TOL).unwrap();
        assert!(fit.best.unwrap().residual < 1e-8);
    }

    #[test]
    fn rejects_r_above_k() {
        let model = rational(8, 2, 3);
        let y = CMatrix::from_element(2, 8, C64::new(1.0, 0.0));
        assert!(matches!(
            varpro_fit(&y, &model, 0, 3, &LmSettings::default(), RANK_TOL),
            Err(SolveError::InvalidArgument(_))
        ));
    }
}
