//! Compensated (double-double) Horner evaluation of integer-coefficient
//! polynomials at a complex point. Chebyshev and half-angle expansions have
//! large alternating coefficients; plain Horner loses several digits there.

use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    fn from_i128(c: i128) -> Self {
        let hi = c as f64;
        // exact for |c| < 2^106
        let rest = c.wrapping_sub(hi as i128);
        let (hi, lo) = fast_two_sum(hi, rest as f64);
        Self { hi, lo }
    }

    fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = fast_two_sum(s, e);
        Self { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = fast_two_sum(p, e);
        Self { hi, lo }
    }

    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Coefficients pre-split into double-double form, lowest degree first.
#[derive(Clone, Debug, PartialEq)]
pub struct CompensatedPoly {
    coeffs: Vec<DoubleDouble>,
}

impl CompensatedPoly {
    pub fn from_integers(coeffs: &[i128]) -> Self {
        Self { coeffs: coeffs.iter().map(|&c| DoubleDouble::from_i128(c)).collect() }
    }

    pub fn eval(&self, x: C64) -> C64 {
        let mut re = DoubleDouble::ZERO;
        let mut im = DoubleDouble::ZERO;
        for &c in self.coeffs.iter().rev() {
            // (re + i im)(x.re + i x.im) + c
            let new_re = re.mul_f64(x.re).add(im.mul_f64(x.im).neg()).add(c);
            let new_im = re.mul_f64(x.im).add(im.mul_f64(x.re));
            re = new_re;
            im = new_im;
        }
        C64::new(re.to_f64(), im.to_f64())
    }
}
