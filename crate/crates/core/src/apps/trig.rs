//! Exact integer polynomials behind the multiple-angle identities
//!
//! ```text
//! cos nζ = P_n(cos ζ) = Q_n(tan(ζ/2)),   sin nζ = R_n(tan(ζ/2)).
//! ```
//!
//! `P_n` is assembled from the binomial sum
//! `Σ_k C(n,2k) (x²−1)^k x^(n−2k)`; `Q_n` and `R_n` share the denominator
//! `(1+t²)^n` and their numerators are the real and imaginary parts of
//! `((1−t²) + 2it)^n`. All coefficients are exact `i128` values; every
//! operation reports overflow instead of wrapping.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CompensatedPoly;
use crate::rng::{rng_for, Stream};
use crate::C64;

/// Largest degree accepted by the constructors in this module.
pub const MAX_DEGREE: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrigError {
    #[error("degree {0} exceeds the supported maximum {MAX_DEGREE}")]
    DegreeTooLarge(i64),
    #[error("degree must be non-negative, got {0}")]
    NegativeDegree(i64),
    #[error("integer overflow while expanding polynomial coefficients")]
    Overflow,
}

/// Polynomial with exact integer coefficients, lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntPoly {
    coeffs: Vec<i128>,
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<i128>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::new(vec![0])
    }

    pub fn one() -> Self {
        Self::new(vec![1])
    }

    pub fn coeffs(&self) -> &[i128] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, TrigError> {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0i128; len];
        for (i, slot) in out.iter_mut().enumerate() {
            let a = self.coeffs.get(i).copied().unwrap_or(0);
            let b = other.coeffs.get(i).copied().unwrap_or(0);
            *slot = a.checked_add(b).ok_or(TrigError::Overflow)?;
        }
        Ok(Self::new(out))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, TrigError> {
        self.checked_add(&other.checked_scale(-1)?)
    }

    pub fn checked_scale(&self, c: i128) -> Result<Self, TrigError> {
        let coeffs =
            self.coeffs.iter().map(|&a| a.checked_mul(c).ok_or(TrigError::Overflow)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(coeffs))
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, TrigError> {
        let mut out = vec![0i128; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                let term = a.checked_mul(b).ok_or(TrigError::Overflow)?;
                out[i + j] = out[i + j].checked_add(term).ok_or(TrigError::Overflow)?;
            }
        }
        Ok(Self::new(out))
    }

    pub fn checked_pow(&self, exp: u32) -> Result<Self, TrigError> {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc = acc.checked_mul(self)?;
        }
        Ok(acc)
    }

    /// Multiply by `x^k`.
    pub fn shift(&self, k: usize) -> Self {
        let mut coeffs = vec![0i128; k];
        coeffs.extend_from_slice(&self.coeffs);
        Self::new(coeffs)
    }

    pub fn derivative(&self) -> Result<Self, TrigError> {
        if self.coeffs.len() == 1 {
            return Ok(Self::zero());
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c.checked_mul(k as i128).ok_or(TrigError::Overflow))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(coeffs))
    }

    /// Human-readable form in the variable `var`, highest degree first.
    pub fn render(&self, var: &str) -> String {
        let mut out = String::new();
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 && !(k == 0 && out.is_empty()) {
                continue;
            }
            let mag = c.unsigned_abs();
            if out.is_empty() {
                if c < 0 {
                    out.push('-');
                }
            } else {
                out.push_str(if c < 0 { " - " } else { " + " });
            }
            match (k, mag) {
                (0, _) => out.push_str(&mag.to_string()),
                (_, 1) => {}
                _ => out.push_str(&format!("{mag}*")),
            }
            match k {
                0 => {}
                1 => out.push_str(var),
                _ => out.push_str(&format!("{var}^{k}")),
            }
        }
        out
    }

    /// Plain Horner evaluation in `f64`.
    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64)
    }
}

fn check_degree(n: i64) -> Result<u32, TrigError> {
    if n < 0 {
        return Err(TrigError::NegativeDegree(n));
    }
    if n > MAX_DEGREE as i64 {
        return Err(TrigError::DegreeTooLarge(n));
    }
    Ok(n as u32)
}

fn binomial(n: u32, k: u32) -> Result<i128, TrigError> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul((n - i) as i128).ok_or(TrigError::Overflow)? / (i as i128 + 1);
    }
    Ok(acc)
}

/// `P_n` with `cos nζ = P_n(cos ζ)`, from `Σ_k C(n,2k) (x²−1)^k x^(n−2k)`.
pub fn cheb_p(n: i64) -> Result<IntPoly, TrigError> {
    let n = check_degree(n)?;
    let x2m1 = IntPoly::new(vec![-1, 0, 1]);
    let mut acc = IntPoly::zero();
    for k in 0..=n / 2 {
        let term = x2m1.checked_pow(k)?.shift((n - 2 * k) as usize).checked_scale(binomial(n, 2 * k)?)?;
        acc = acc.checked_add(&term)?;
    }
    Ok(acc)
}

/// Rational function of `t = tan(ζ/2)` whose denominator is `(1+t²)^n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrigRational {
    pub degree: u32,
    pub numerator: IntPoly,
    pub denominator: IntPoly,
}

impl TrigRational {
    pub fn eval_f64(&self, t: f64) -> f64 {
        self.numerator.eval_f64(t) / self.denominator.eval_f64(t)
    }
}

/// `(Q_n, R_n)` with `cos nζ = Q_n(tan(ζ/2))` and `sin nζ = R_n(tan(ζ/2))`.
pub fn tan_half_qr(n: i64) -> Result<(TrigRational, TrigRational), TrigError> {
    let n = check_degree(n)?;
    // Gaussian-integer polynomial (re, im) raised to the n-th power.
    let base_re = IntPoly::new(vec![1, 0, -1]);
    let base_im = IntPoly::new(vec![0, 2]);
    let mut re = IntPoly::one();
    let mut im = IntPoly::zero();
    for _ in 0..n {
        let next_re = re.checked_mul(&base_re)?.checked_sub(&im.checked_mul(&base_im)?)?;
        let next_im = re.checked_mul(&base_im)?.checked_add(&im.checked_mul(&base_re)?)?;
        re = next_re;
        im = next_im;
    }
    let denominator = IntPoly::new(vec![1, 0, 1]).checked_pow(n)?;
    Ok((
        TrigRational { degree: n, numerator: re, denominator: denominator.clone() },
        TrigRational { degree: n, numerator: im, denominator },
    ))
}

/// Exact check that `Q_n² + R_n² = 1`, i.e. the numerators satisfy
/// `num_Q² + num_R² − (1+t²)^(2n) ≡ 0`.
pub fn pythagorean_residual(n: i64) -> Result<IntPoly, TrigError> {
    let (q, r) = tan_half_qr(n)?;
    let lhs = q.numerator.checked_mul(&q.numerator)?.checked_add(&r.numerator.checked_mul(&r.numerator)?)?;
    let rhs = q.denominator.checked_mul(&q.denominator)?;
    lhs.checked_sub(&rhs)
}

/// Worst absolute errors of the three identities at one degree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub cheb_error: f64,
    pub q_error: f64,
    pub r_error: f64,
    /// `Q_n² + R_n² − 1` vanishes identically in integer arithmetic.
    pub pythagorean_exact: bool,
}

/// Check `cos nζ = P_n(cos ζ) = Q_n(tan(ζ/2))` and `sin nζ = R_n(tan(ζ/2))`
/// for `n = 1..=n_max` at `points` uniform angles in `(−π, π)` per degree.
/// Polynomials are evaluated with compensated Horner.
pub fn identity_sweep(n_max: i64, seed: u64, points: usize) -> Result<Vec<SweepRow>, TrigError> {
    if n_max < 1 {
        return Err(TrigError::NegativeDegree(n_max));
    }
    check_degree(n_max)?;
    let mut rows = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let p = CompensatedPoly::from_integers(cheb_p(n)?.coeffs());
        let (q, r) = tan_half_qr(n)?;
        let q_num = CompensatedPoly::from_integers(q.numerator.coeffs());
        let r_num = CompensatedPoly::from_integers(r.numerator.coeffs());
        let den = CompensatedPoly::from_integers(q.denominator.coeffs());
        let pythagorean_exact = pythagorean_residual(n)?.is_zero();
        let mut rng = rng_for(seed, Stream::Harness, n as u64);
        let mut row = SweepRow { n: n as u32, cheb_error: 0.0, q_error: 0.0, r_error: 0.0, pythagorean_exact };
        let nf = n as f64;
        for _ in 0..points {
            let z: f64 = rng.random_range(-PI..PI);
            let c = C64::new(z.cos(), 0.0);
            let t = C64::new((z / 2.0).tan(), 0.0);
            let d = den.eval(t);
            row.cheb_error = row.cheb_error.max((p.eval(c).re - (nf * z).cos()).abs());
            row.q_error = row.q_error.max(((q_num.eval(t) / d).re - (nf * z).cos()).abs());
            row.r_error = row.r_error.max(((r_num.eval(t) / d).re - (nf * z).sin()).abs());
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_forms() {
        assert_eq!(cheb_p(1).unwrap().render("x"), "x");
        assert_eq!(cheb_p(2).unwrap().render("x"), "2*x^2 - 1");
        let (q, r) = tan_half_qr(1).unwrap();
        assert_eq!(q.numerator.render("t"), "-t^2 + 1");
        assert_eq!(r.numerator.render("t"), "2*t");
        assert_eq!(q.denominator.render("t"), "t^2 + 1");
        assert_eq!(IntPoly::zero().render("t"), "0");
    }

    #[test]
    fn cheb_low_degrees() {
        assert_eq!(cheb_p(0).unwrap().coeffs(), &[1]);
        assert_eq!(cheb_p(1).unwrap().coeffs(), &[0, 1]);
        assert_eq!(cheb_p(2).unwrap().coeffs(), &[-1, 0, 2]);
        assert_eq!(cheb_p(5).unwrap().coeffs(), &[0, 5, 0, -20, 0, 16]);
    }

    #[test]
    fn cheb_numeric_oracle_low_degrees() {
        for (n, z) in [(2i64, 0.3f64), (2, -2.1), (5, 1.7), (5, 0.01)] {
            let p = cheb_p(n).unwrap();
            assert!(((n as f64 * z).cos() - p.eval_f64(z.cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn cheb_recurrence_holds_exactly() {
        let two_x = IntPoly::new(vec![0, 2]);
        for n in 1..=32 {
            let next = cheb_p(n + 1).unwrap();
            let rec = two_x.checked_mul(&cheb_p(n).unwrap()).unwrap().checked_sub(&cheb_p(n - 1).unwrap()).unwrap();
            assert_eq!(next, rec, "n = {n}");
        }
    }

    #[test]
    fn half_angle_first_degree() {
        let (q, r) = tan_half_qr(1).unwrap();
        assert_eq!(q.numerator.coeffs(), &[1, 0, -1]);
        assert_eq!(r.numerator.coeffs(), &[0, 2]);
        assert_eq!(q.denominator.coeffs(), &[1, 0, 1]);
    }

    #[test]
    fn half_angle_second_degree() {
        let (q, _) = tan_half_qr(2).unwrap();
        assert_eq!(q.numerator.coeffs(), &[1, 0, -6, 0, 1]);
        assert_eq!(q.denominator.coeffs(), &[1, 0, 2, 0, 1]);
        let z = 0.7f64;
        assert!(((2.0 * z).cos() - q.eval_f64((z / 2.0).tan())).abs() < 1e-12);
    }

    #[test]
    fn pythagorean_identity_is_exact() {
        for n in 0..=32 {
            assert!(pythagorean_residual(n).unwrap().is_zero(), "n = {n}");
        }
    }

    #[test]
    fn degree_guards() {
        assert_eq!(cheb_p(65), Err(TrigError::DegreeTooLarge(65)));
        assert_eq!(tan_half_qr(-1).unwrap_err(), TrigError::NegativeDegree(-1));
        assert!(cheb_p(64).is_ok());
        assert!(tan_half_qr(64).is_ok());
    }

    #[test]
    fn overflow_is_reported_not_wrapped() {
        let big = IntPoly::new(vec![i128::MAX / 2, 1]);
        assert_eq!(big.checked_scale(4), Err(TrigError::Overflow));
        // squaring the degree-64 numerators exceeds 128 bits
        assert_eq!(pythagorean_residual(64), Err(TrigError::Overflow));
    }

    #[test]
    fn sweep_to_degree_twenty() {
        let rows = identity_sweep(20, 7, 100).unwrap();
        assert_eq!(rows.len(), 20);
        for row in &rows {
            assert!(row.cheb_error < 1e-9, "{row:?}");
            assert!(row.q_error < 1e-9, "{row:?}");
            assert!(row.r_error < 1e-9, "{row:?}");
            assert!(row.pythagorean_exact);
        }
        assert!(identity_sweep(65, 0, 1).is_err());
        assert!(identity_sweep(0, 0, 1).is_err());
    }
}
