//! Source models for deterministic signal separation: exponential
//! polynomials, rational functions, and the mixed example signal
//! `ζ_1^t/t + (ζ_2+t)/(ζ_3+t)·cos(ζ_4 t + ζ_5) + cos(ζ_6 t)`.

use crate::model::{parse_expr, ASpec, ColumnModel, Domain, FactorModel, Primitive, ScalingDeclaration, Transform};
use crate::{CMatrix, CVector, C64};

use super::AppError;

/// A generated model together with its closed-form bound on `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedModel {
    pub model: FactorModel,
    pub bound: usize,
}

/// `K = R = bound`; callers resize with [`FactorModel::with_k`] and
/// [`FactorModel::with_r`].
fn finish(column: ColumnModel, domain: Domain, bound: usize) -> Result<BoundedModel, AppError> {
    let model = FactorModel::new(bound, bound, domain, ASpec::GenericDense, column, ScalingDeclaration::DeclaredTrue)?;
    Ok(BoundedModel { model, bound })
}

/// Template `Σ_f (c_{f,0} + c_{f,1} n + … + c_{f,d_f} n^{d_f}) · a_f^n`.
/// Block `f` uses `x_o = a_f` followed by its `d_f + 1` coefficients.
pub fn exp_poly_template(degrees: &[usize]) -> String {
    let mut terms = Vec::new();
    let mut next = 1;
    for &d in degrees {
        let base = next;
        let coeffs: Vec<String> = (0..=d)
            .map(|k| {
                let x = format!("x{}", base + 1 + k);
                match k {
                    0 => x,
                    1 => format!("{x}*n"),
                    _ => format!("{x}*n^{k}"),
                }
            })
            .collect();
        terms.push(format!("({})*x{base}^n", coeffs.join(" + ")));
        next += d + 2;
    }
    terms.join(" + ")
}

/// Sampled exponential polynomials with bound `N − (Σd_f + 2F)`.
pub fn exp_poly_model(degrees: &[usize], n: usize) -> Result<BoundedModel, AppError> {
    if degrees.is_empty() {
        return Err(AppError::InvalidArgument("need at least one exponential term".into()));
    }
    let l: usize = degrees.iter().map(|d| d + 2).sum();
    if n <= l {
        return Err(AppError::InvalidArgument(format!("N = {n} gives no positive bound (needs N > {l})")));
    }
    let column = ColumnModel::from_template(n, l, parse_expr(&exp_poly_template(degrees))?, Transform::identity(l))?;
    finish(column, Domain::Complex, n - l)
}

/// Template `(x_1 + x_2 n + … + x_{p+1} n^p) / (x_{p+2} + … + x_{p+q+2} n^q)`.
pub fn rational_template(p: usize, q: usize) -> String {
    let poly = |first: usize, deg: usize| -> String {
        (0..=deg)
            .map(|k| match k {
                0 => format!("x{}", first),
                1 => format!("x{}*n", first + 1),
                _ => format!("x{}*n^{k}", first + k),
            })
            .collect::<Vec<_>>()
            .join(" + ")
    };
    format!("({})/({})", poly(1, p), poly(p + 2, q))
}

/// Sampled rational functions of degree `(p, q)` with bound `N − (p+q+1)`.
pub fn rational_model(p: usize, q: usize, n: usize) -> Result<BoundedModel, AppError> {
    if q == 0 {
        return Err(AppError::InvalidArgument("q must be at least 1".into()));
    }
    let l = p + q + 2;
    if n <= p + q + 1 {
        return Err(AppError::InvalidArgument(format!("N = {n} gives no positive bound (needs N > {})", p + q + 1)));
    }
    let column = ColumnModel::from_template(n, l, parse_expr(&rational_template(p, q))?, Transform::identity(l))?;
    finish(column, Domain::Complex, n - (p + q + 1))
}

/// Columns `r(x)` at `a = (1, 0, …)`, `b = (k, 1, 0, …)` for `k = 0..N−1`,
/// i.e. the Hilbert-type matrix `[1/(k+n)]`.
pub fn rational_hilbert_block(p: usize, q: usize, n: usize) -> Result<CMatrix, AppError> {
    let bm = rational_model(p, q, n.max(p + q + 2))?;
    let cm = bm.model.column();
    let l = p + q + 2;
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let mut x = vec![C64::new(0.0, 0.0); l];
        x[0] = C64::new(1.0, 0.0);
        x[p + 1] = C64::new(k as f64, 0.0);
        x[p + 2] = C64::new(1.0, 0.0);
        let col = cm.eval_r(&x)?;
        cols.push(CVector::from_iterator(n, col.iter().take(n).copied()));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Row template of the example signal after half-angle rationalization.
pub const EXAMPLE_TEMPLATE: &str = "x1^n/n + (x2 + n)/(x3 + n)*(tanQ(n, x4)*(1 - x5^2)/(1 + x5^2) \
                                    - tanR(n, x4)*2*x5/(1 + x5^2)) + chebP(n, x6)";

/// Example signal with `l = 6` and transform `(id, id, id, tan_half,
/// tan_half, cos)`; bound `N − 6`.
pub fn example_model(n: usize) -> Result<BoundedModel, AppError> {
    if n <= 6 {
        return Err(AppError::InvalidArgument(format!("N = {n}, need N > 6")));
    }
    let transform = Transform::new(vec![
        Primitive::Identity,
        Primitive::Identity,
        Primitive::Identity,
        Primitive::TanHalf,
        Primitive::TanHalf,
        Primitive::Cos,
    ]);
    let column = ColumnModel::from_template(n, 6, parse_expr(EXAMPLE_TEMPLATE)?, transform)?;
    finish(column, Domain::Real, n - 6)
}

/// Direct evaluation of the example signal at sample `t`.
pub fn example_signal(zeta: &[C64], t: f64) -> C64 {
    let tc = C64::new(t, 0.0);
    zeta[0].powf(t) / tc + (zeta[1] + tc) / (zeta[2] + tc) * (zeta[3] * tc + zeta[4]).cos() + (zeta[5] * tc).cos()
}
