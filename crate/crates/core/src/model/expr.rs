//! Expression trees for row templates and their row-expanded rational form.
//!
//! A template [`Expr`] may mention the row token `n`, integer powers whose
//! exponent depends on `n`, and the row-indexed builtins `chebP`, `tanQ`,
//! `tanR`. Expanding at a fixed row yields a [`RatExpr`]: a pure rational
//! expression in the variables, where builtins have become exact
//! integer-coefficient polynomials.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::dual::DualVector;
use super::horner::CompensatedPoly;
use crate::apps::trig::{self, IntPoly, TrigError};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    /// `cos(kζ)` as a polynomial in `cos ζ`.
    ChebP,
    /// `cos(kζ)` as a rational function of `tan(ζ/2)`.
    TanQ,
    /// `sin(kζ)` as a rational function of `tan(ζ/2)`.
    TanR,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::ChebP => "chebP",
            Builtin::TanQ => "tanQ",
            Builtin::TanR => "tanR",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "chebP" => Some(Builtin::ChebP),
            "tanQ" => Some(Builtin::TanQ),
            "tanR" => Some(Builtin::TanR),
            _ => None,
        }
    }
}

/// Template expression over variables `x1..xl` (stored 0-based) and the row token.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(C64),
    Var(usize),
    Row,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Base raised to an exponent that must expand to an integer.
    Pow(Box<Expr>, Box<Expr>),
    /// Builtin with a degree expression (row-only) and an argument.
    Builtin(Builtin, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpandError {
    #[error("exponent does not evaluate to an integer at row {row}")]
    NonIntegerExponent { row: i64 },
    #[error("exponents and builtin degrees may only depend on the row token n")]
    VariableInExponent,
    #[error("builtin degree: {0}")]
    Trig(#[from] TrigError),
    #[error("exponent {0} out of range")]
    ExponentRange(i64),
}

impl Expr {
    pub fn constant(re: f64) -> Self {
        Expr::Const(C64::new(re, 0.0))
    }

    /// Variable `x_j` using the 1-based numbering of the text format.
    pub fn var(j: usize) -> Self {
        assert!(j >= 1, "variables are numbered from 1");
        Expr::Var(j - 1)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn pow(base: Expr, exponent: Expr) -> Self {
        Expr::Pow(Box::new(base), Box::new(exponent))
    }

    pub fn builtin(kind: Builtin, degree: Expr, arg: Expr) -> Self {
        Expr::Builtin(kind, Box::new(degree), Box::new(arg))
    }

    /// Largest 0-based variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Row => None,
            Expr::Var(j) => Some(*j),
            Expr::Neg(e) => e.max_var(),
            Expr::Binary(_, a, b) | Expr::Pow(a, b) | Expr::Builtin(_, a, b) => a.max_var().max(b.max_var()),
        }
    }

    pub fn mentions_row(&self) -> bool {
        match self {
            Expr::Row => true,
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Neg(e) => e.mentions_row(),
            Expr::Binary(_, a, b) | Expr::Pow(a, b) | Expr::Builtin(_, a, b) => a.mentions_row() || b.mentions_row(),
        }
    }

    /// Evaluate a variable-free expression at row `n`.
    fn eval_row_only(&self, n: i64) -> Result<C64, ExpandError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Row => Ok(C64::new(n as f64, 0.0)),
            Expr::Var(_) | Expr::Builtin(..) => Err(ExpandError::VariableInExponent),
            Expr::Neg(e) => Ok(-e.eval_row_only(n)?),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval_row_only(n)?, b.eval_row_only(n)?);
                Ok(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                })
            }
            Expr::Pow(a, b) => {
                let k = integer_at(b, n)?;
                Ok(a.eval_row_only(n)?.powi(k as i32))
            }
        }
    }

    /// Substitute row `n` and expand builtins into a pure rational expression.
    pub fn expand(&self, n: i64) -> Result<RatExpr, ExpandError> {
        Ok(match self {
            Expr::Const(c) => RatExpr::Const(*c),
            Expr::Var(j) => RatExpr::Var(*j),
            Expr::Row => RatExpr::Const(C64::new(n as f64, 0.0)),
            Expr::Neg(e) => match e.expand(n)? {
                RatExpr::Const(c) => RatExpr::Const(-c),
                inner => RatExpr::Neg(Box::new(inner)),
            },
            Expr::Binary(op, a, b) => fold_binary(*op, a.expand(n)?, b.expand(n)?),
            Expr::Pow(base, exponent) => {
                let k = integer_at(exponent, n)?;
                if k.abs() > i32::MAX as i64 {
                    return Err(ExpandError::ExponentRange(k));
                }
                match (base.expand(n)?, k) {
                    (_, 0) => RatExpr::Const(C64::new(1.0, 0.0)),
                    (inner, 1) => inner,
                    (RatExpr::Const(c), k) if k > 0 => RatExpr::Const(c.powi(k as i32)),
                    (inner, k) => RatExpr::Powi(Box::new(inner), k as i32),
                }
            }
            Expr::Builtin(kind, degree, arg) => {
                let d = integer_at(degree, n)?;
                let arg = arg.expand(n)?;
                match kind {
                    Builtin::ChebP => RatExpr::poly(trig::cheb_p(d)?, arg),
                    Builtin::TanQ | Builtin::TanR => {
                        let (q, r) = trig::tan_half_qr(d)?;
                        let part = if *kind == Builtin::TanQ { q } else { r };
                        RatExpr::Binary(
                            BinOp::Div,
                            Box::new(RatExpr::poly(part.numerator, arg.clone())),
                            Box::new(RatExpr::poly(part.denominator, arg)),
                        )
                    }
                }
            }
        })
    }
}

fn integer_at(e: &Expr, n: i64) -> Result<i64, ExpandError> {
    if e.max_var().is_some() {
        return Err(ExpandError::VariableInExponent);
    }
    let v = e.eval_row_only(n)?;
    let k = v.re.round();
    if !v.re.is_finite() || v.im != 0.0 || (v.re - k).abs() > 1e-9 {
        return Err(ExpandError::NonIntegerExponent { row: n });
    }
    Ok(k as i64)
}

fn fold_binary(op: BinOp, a: RatExpr, b: RatExpr) -> RatExpr {
    if let (RatExpr::Const(x), RatExpr::Const(y)) = (&a, &b) {
        let folded = match op {
            BinOp::Add => Some(x + y),
            BinOp::Sub => Some(x - y),
            BinOp::Mul => Some(x * y),
            BinOp::Div if y.norm() > 0.0 => Some(x / y),
            BinOp::Div => None,
        };
        if let Some(c) = folded {
            return RatExpr::Const(c);
        }
    }
    RatExpr::Binary(op, Box::new(a), Box::new(b))
}

fn fmt_const(c: C64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        if c.re < 0.0 || (c.re == 0.0 && c.re.is_sign_negative()) {
            write!(f, "(-{:?})", -c.re)
        } else {
            write!(f, "{:?}", c.re)
        }
    } else if c.re == 0.0 {
        write!(f, "({:?}*i)", c.im)
    } else {
        write!(f, "({:?} + {:?}*i)", c.re, c.im)
    }
}

/// Fully parenthesized rendering accepted back by the parser.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Var(j) => write!(f, "x{}", j + 1),
            Expr::Row => write!(f, "n"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Builtin(kind, d, a) => write!(f, "{}({d}, {a})", kind.name()),
        }
    }
}

/// Exact integer polynomial with precomputed compensated evaluators for its
/// value and derivative.
#[derive(Debug, PartialEq)]
pub struct PolyNode {
    pub poly: IntPoly,
    value: CompensatedPoly,
    slope: CompensatedPoly,
}

impl PolyNode {
    fn new(poly: IntPoly) -> Self {
        // derivative coefficients of a degree <= 128 polynomial with |c| < 2^127
        // may overflow; fall back to a zero slope only if that ever happens
        let slope = poly.derivative().unwrap_or_else(|_| IntPoly::zero());
        Self {
            value: CompensatedPoly::from_integers(poly.coeffs()),
            slope: CompensatedPoly::from_integers(slope.coeffs()),
            poly,
        }
    }
}

/// Row-expanded rational expression: no row token, no builtins.
#[derive(Clone, Debug, PartialEq)]
pub enum RatExpr {
    Const(C64),
    Var(usize),
    Neg(Box<RatExpr>),
    Binary(BinOp, Box<RatExpr>, Box<RatExpr>),
    Powi(Box<RatExpr>, i32),
    Poly(Arc<PolyNode>, Box<RatExpr>),
}

/// Evaluation failure inside a single row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalFault {
    /// A division failed the relative pole guard.
    Pole,
    NonFinite,
}

/// Scalar carrier for [`RatExpr`] evaluation: plain values or dual numbers.
pub trait Number: Sized + Clone {
    fn konst(c: C64, dim: usize) -> Self;
    fn value(&self) -> C64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn powi(&self, k: i32) -> Self;
    fn poly(&self, node: &PolyNode) -> Self;
}

impl Number for C64 {
    fn konst(c: C64, _: usize) -> Self {
        c
    }
    fn value(&self) -> C64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powi(&self, k: i32) -> Self {
        C64::powi(self, k)
    }
    fn poly(&self, node: &PolyNode) -> Self {
        node.value.eval(*self)
    }
}

impl Number for DualVector {
    fn konst(c: C64, dim: usize) -> Self {
        DualVector::constant(c, dim)
    }
    fn value(&self) -> C64 {
        self.value
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn powi(&self, k: i32) -> Self {
        DualVector::powi(self, k)
    }
    fn poly(&self, node: &PolyNode) -> Self {
        self.map(node.value.eval(self.value), node.slope.eval(self.value))
    }
}

/// `|den| > eps (1 + |num|)`.
pub fn passes_pole_guard(num: C64, den: C64, eps: f64) -> bool {
    den.norm() > eps * (1.0 + num.norm())
}

impl RatExpr {
    fn poly(poly: IntPoly, arg: RatExpr) -> Self {
        RatExpr::Poly(Arc::new(PolyNode::new(poly)), Box::new(arg))
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            RatExpr::Const(_) => None,
            RatExpr::Var(j) => Some(*j),
            RatExpr::Neg(e) | RatExpr::Powi(e, _) | RatExpr::Poly(_, e) => e.max_var(),
            RatExpr::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Evaluate with `vars[j]` bound to variable `j`; `dim` sizes constants.
    pub fn eval<T: Number>(&self, vars: &[T], dim: usize, eps: f64) -> Result<T, EvalFault> {
        let out = match self {
            RatExpr::Const(c) => T::konst(*c, dim),
            RatExpr::Var(j) => match vars.get(*j) {
                Some(v) => v.clone(),
                None => return Err(EvalFault::NonFinite),
            },
            RatExpr::Neg(e) => e.eval(vars, dim, eps)?.neg(),
            RatExpr::Binary(op, a, b) => {
                let a = a.eval(vars, dim, eps)?;
                let b = b.eval(vars, dim, eps)?;
                match op {
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => a.mul(&b),
                    BinOp::Div => {
                        if !passes_pole_guard(a.value(), b.value(), eps) {
                            return Err(EvalFault::Pole);
                        }
                        a.div(&b)
                    }
                }
            }
            RatExpr::Powi(e, k) => {
                let base = e.eval(vars, dim, eps)?;
                if *k < 0 {
                    let denom = base.powi(-k);
                    if !passes_pole_guard(C64::new(1.0, 0.0), denom.value(), eps) {
                        return Err(EvalFault::Pole);
                    }
                    T::konst(C64::new(1.0, 0.0), dim).div(&denom)
                } else {
                    base.powi(*k)
                }
            }
            RatExpr::Poly(node, e) => e.eval(vars, dim, eps)?.poly(node),
        };
        let v = out.value();
        if v.re.is_finite() && v.im.is_finite() {
            Ok(out)
        } else {
            Err(EvalFault::NonFinite)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(e: &Expr, n: i64) -> RatExpr {
        e.expand(n).unwrap()
    }

    #[test]
    fn row_token_folds_into_constants() {
        // x1 + x2*n at n = 3
        let e = Expr::binary(BinOp::Add, Expr::var(1), Expr::binary(BinOp::Mul, Expr::var(2), Expr::Row));
        let expected = RatExpr::Binary(
            BinOp::Add,
            Box::new(RatExpr::Var(0)),
            Box::new(RatExpr::Binary(
                BinOp::Mul,
                Box::new(RatExpr::Var(1)),
                Box::new(RatExpr::Const(C64::new(3.0, 0.0))),
            )),
        );
        assert_eq!(rows(&e, 3), expected);
    }

    #[test]
    fn row_dependent_exponents() {
        let e = Expr::pow(Expr::var(1), Expr::binary(BinOp::Sub, Expr::Row, Expr::constant(1.0)));
        assert_eq!(rows(&e, 1), RatExpr::Const(C64::new(1.0, 0.0)));
        assert_eq!(rows(&e, 4), RatExpr::Powi(Box::new(RatExpr::Var(0)), 3));
        let neg = Expr::pow(Expr::var(1), Expr::constant(-2.0));
        let v = rows(&neg, 1).eval(&[C64::new(2.0, 0.0)], 1, 1e-12).unwrap();
        assert!((v - C64::new(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn exponents_reject_variables_and_fractions() {
        let e = Expr::pow(Expr::var(1), Expr::var(2));
        assert_eq!(e.expand(1), Err(ExpandError::VariableInExponent));
        let e = Expr::pow(Expr::var(1), Expr::constant(0.5));
        assert_eq!(e.expand(1), Err(ExpandError::NonIntegerExponent { row: 1 }));
    }

    #[test]
    fn builtins_expand_to_exact_identities() {
        let z = 0.9f64;
        for n in 1..=12 {
            let cheb = Expr::builtin(Builtin::ChebP, Expr::Row, Expr::var(1));
            let v = rows(&cheb, n).eval(&[C64::new(z.cos(), 0.0)], 1, 1e-12).unwrap();
            assert!((v.re - (n as f64 * z).cos()).abs() < 1e-13);
            let t = C64::new((z / 2.0).tan(), 0.0);
            let q = Expr::builtin(Builtin::TanQ, Expr::Row, Expr::var(1));
            let r = Expr::builtin(Builtin::TanR, Expr::Row, Expr::var(1));
            assert!((rows(&q, n).eval(&[t], 1, 1e-12).unwrap().re - (n as f64 * z).cos()).abs() < 1e-13);
            assert!((rows(&r, n).eval(&[t], 1, 1e-12).unwrap().re - (n as f64 * z).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn pole_guard_trips_on_zero_denominator() {
        let e = Expr::binary(BinOp::Div, Expr::constant(1.0), Expr::var(1));
        let r = rows(&e, 1);
        assert_eq!(r.eval(&[C64::new(0.0, 0.0)], 1, 1e-12), Err(EvalFault::Pole));
        assert!(r.eval(&[C64::new(1e-3, 0.0)], 1, 1e-12).is_ok());
    }

    #[test]
    fn display_is_fully_parenthesized() {
        let e = Expr::binary(
            BinOp::Div,
            Expr::binary(BinOp::Add, Expr::var(1), Expr::Const(C64::new(-0.5, 2.0))),
            Expr::builtin(Builtin::TanQ, Expr::Row, Expr::var(2)),
        );
        assert_eq!(e.to_string(), "((x1 + (-0.5 + 2.0*i)) / tanQ(n, x2))");
    }
}
