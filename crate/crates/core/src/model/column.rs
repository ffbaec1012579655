use std::collections::BTreeMap;

use crate::config::POLE_EPS;
use crate::rng::{complex_gaussian, rng_for, Stream};
use crate::{CMatrix, CVector, C64};

use super::dual::DualVector;
use super::expr::{passes_pole_guard, BinOp, EvalFault, Expr, Number, RatExpr};
use super::transform::Transform;
use super::ModelError;

/// Number of random complex points used to reject identically-zero denominators.
const DENOMINATOR_PROBES: u64 = 8;

/// One concrete row `p_n / q_n` after row expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalRow {
    pub numerator: RatExpr,
    pub denominator: RatExpr,
}

impl RationalRow {
    fn from_expanded(e: RatExpr) -> Self {
        match e {
            RatExpr::Binary(BinOp::Div, num, den) => Self { numerator: *num, denominator: *den },
            other => Self { numerator: other, denominator: RatExpr::Const(C64::new(1.0, 0.0)) },
        }
    }

    fn eval<T: Number>(&self, vars: &[T], dim: usize, eps: f64) -> Result<T, EvalFault> {
        let p = self.numerator.eval(vars, dim, eps)?;
        let q = self.denominator.eval(vars, dim, eps)?;
        if !passes_pole_guard(p.value(), q.value(), eps) {
            return Err(EvalFault::Pole);
        }
        let v = p.div(&q);
        let val = v.value();
        if val.re.is_finite() && val.im.is_finite() {
            Ok(v)
        } else {
            Err(EvalFault::NonFinite)
        }
    }
}

/// Structured column `b(ζ) = r(f(ζ))` with `N` rational rows in `l` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnModel {
    n_rows: usize,
    l: usize,
    template: Option<Expr>,
    overrides: BTreeMap<usize, Expr>,
    transform: Transform,
    rows: Vec<RationalRow>,
    pole_eps: f64,
}

impl ColumnModel {
    /// Every row instantiated from one template in the row token `n = 1..N`.
    pub fn from_template(n_rows: usize, l: usize, template: Expr, transform: Transform) -> Result<Self, ModelError> {
        Self::new(n_rows, l, Some(template), BTreeMap::new(), transform)
    }

    /// Explicit per-row expressions, row `n` at index `n - 1`.
    pub fn from_rows(l: usize, rows: Vec<Expr>, transform: Transform) -> Result<Self, ModelError> {
        let n_rows = rows.len();
        let overrides = rows.into_iter().enumerate().map(|(i, e)| (i + 1, e)).collect();
        Self::new(n_rows, l, None, overrides, transform)
    }

    /// General constructor: an optional template plus explicit rows (1-based)
    /// that take precedence over it.
    pub fn new(
        n_rows: usize,
        l: usize,
        template: Option<Expr>,
        overrides: BTreeMap<usize, Expr>,
        transform: Transform,
    ) -> Result<Self, ModelError> {
        if n_rows == 0 || l == 0 {
            return Err(ModelError::DimensionMismatch(format!(
                "column model needs N >= 1 and l >= 1, got N={n_rows}, l={l}"
            )));
        }
        if transform.len() != l {
            return Err(ModelError::DimensionMismatch(format!(
                "transform has {} coordinates but l = {l}",
                transform.len()
            )));
        }
        if let Some(&row) = overrides.keys().find(|&&r| r == 0 || r > n_rows) {
            return Err(ModelError::DimensionMismatch(format!("explicit row b_{row} outside 1..={n_rows}")));
        }
        let mut rows = Vec::with_capacity(n_rows);
        for n in 1..=n_rows {
            let source = overrides
                .get(&n)
                .or(template.as_ref())
                .ok_or_else(|| ModelError::DimensionMismatch(format!("row {n} has no expression")))?;
            if let Some(j) = source.max_var() {
                if j >= l {
                    return Err(ModelError::DimensionMismatch(format!("row {n} uses x{} but l = {l}", j + 1)));
                }
            }
            let expanded = source.expand(n as i64).map_err(|source| ModelError::Expand { row: n, source })?;
            rows.push(RationalRow::from_expanded(expanded));
        }
        let model = Self { n_rows, l, template, overrides, transform, rows, pole_eps: POLE_EPS };
        model.check_denominators()?;
        Ok(model)
    }

    fn check_denominators(&self) -> Result<(), ModelError> {
        let mut alive = vec![false; self.n_rows];
        for probe in 0..DENOMINATOR_PROBES {
            let mut rng = rng_for(0, Stream::Validation, probe);
            let x: Vec<C64> = (0..self.l).map(|_| complex_gaussian(&mut rng)).collect();
            for (n, row) in self.rows.iter().enumerate() {
                if !alive[n] && row.eval(&x, self.l, self.pole_eps).is_ok() {
                    alive[n] = true;
                }
            }
        }
        match alive.iter().position(|a| !a) {
            Some(n) => Err(ModelError::DenominatorVanishes { row: n + 1 }),
            None => Ok(()),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn template(&self) -> Option<&Expr> {
        self.template.as_ref()
    }

    pub fn overrides(&self) -> &BTreeMap<usize, Expr> {
        &self.overrides
    }

    pub fn rows(&self) -> &[RationalRow] {
        &self.rows
    }

    pub fn pole_eps(&self) -> f64 {
        self.pole_eps
    }

    pub fn with_pole_eps(mut self, eps: f64) -> Self {
        self.pole_eps = eps;
        self
    }

    /// Same rational part, identity transform: the model of `r(x)` itself.
    pub fn rational_part(&self) -> Self {
        Self { transform: Transform::identity(self.l), ..self.clone() }
    }

    fn check_point(&self, x: &[C64]) -> Result<(), ModelError> {
        if x.len() != self.l {
            return Err(ModelError::DimensionMismatch(format!(
                "expected a point with {} coordinates, got {}",
                self.l,
                x.len()
            )));
        }
        Ok(())
    }

    fn eval_rows<T: Number>(&self, vars: &[T]) -> Result<Vec<T>, ModelError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(n, row)| row.eval(vars, self.l, self.pole_eps).map_err(|_| ModelError::Pole { row: n + 1 }))
            .collect()
    }

    /// `r(x) = [p_1(x)/q_1(x), …, p_N(x)/q_N(x)]`.
    pub fn eval_r(&self, x: &[C64]) -> Result<CVector, ModelError> {
        self.check_point(x)?;
        Ok(CVector::from_vec(self.eval_rows(x)?))
    }

    /// `J(r, x)`, `N×l`, by forward-mode dual numbers.
    pub fn jacobian_r(&self, x: &[C64]) -> Result<CMatrix, ModelError> {
        self.check_point(x)?;
        let duals: Vec<DualVector> = x.iter().enumerate().map(|(j, &v)| DualVector::variable(v, j, self.l)).collect();
        Ok(self.duals_to_jacobian(&self.eval_rows(&duals)?))
    }

    /// `b(ζ) = r(f(ζ))`.
    pub fn eval_b(&self, zeta: &[C64]) -> Result<CVector, ModelError> {
        self.check_point(zeta)?;
        self.eval_r(&self.transform.apply(zeta)?)
    }

    /// `J(f, ζ)`, diagonal.
    pub fn jacobian_f(&self, zeta: &[C64]) -> Result<CMatrix, ModelError> {
        self.check_point(zeta)?;
        self.transform.jacobian(zeta)
    }

    /// `b(ζ)` together with its Jacobian in `ζ`. Variables are seeded with
    /// `f_j'(ζ_j)` so the transform derivative is carried through the dual
    /// arithmetic instead of multiplying `J(r)·J(f)` afterwards.
    pub fn eval_b_with_jacobian(&self, zeta: &[C64]) -> Result<(CVector, CMatrix), ModelError> {
        self.check_point(zeta)?;
        let fx = self.transform.apply(zeta)?;
        let slopes = self.transform.derivatives(zeta)?;
        let duals: Vec<DualVector> =
            fx.iter().zip(&slopes).enumerate().map(|(j, (&v, &s))| DualVector::seeded(v, j, s, self.l)).collect();
        let rows = self.eval_rows(&duals)?;
        let values = CVector::from_iterator(rows.len(), rows.iter().map(|d| d.value));
        Ok((values, self.duals_to_jacobian(&rows)))
    }

    pub fn jacobian_b(&self, zeta: &[C64]) -> Result<CMatrix, ModelError> {
        Ok(self.eval_b_with_jacobian(zeta)?.1)
    }

    fn duals_to_jacobian(&self, rows: &[DualVector]) -> CMatrix {
        CMatrix::from_fn(self.n_rows, self.l, |i, j| rows[i].partials[j])
    }
}
