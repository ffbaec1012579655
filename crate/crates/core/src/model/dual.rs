//! Forward-mode dual numbers carrying a full gradient with respect to the
//! `l` model variables.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct DualVector {
    pub value: C64,
    pub partials: Vec<C64>,
}

impl DualVector {
    pub fn constant(value: C64, dim: usize) -> Self {
        Self { value, partials: vec![C64::new(0.0, 0.0); dim] }
    }

    /// Variable `j` (0-based) holding `value`, with unit partial in slot `j`.
    pub fn variable(value: C64, j: usize, dim: usize) -> Self {
        let mut partials = vec![C64::new(0.0, 0.0); dim];
        partials[j] = C64::new(1.0, 0.0);
        Self { value, partials }
    }

    /// A value whose gradient is `slope * e_j`; used to push a transform
    /// derivative `f_j'(ζ_j)` through the rational part.
    pub fn seeded(value: C64, j: usize, slope: C64, dim: usize) -> Self {
        let mut partials = vec![C64::new(0.0, 0.0); dim];
        partials[j] = slope;
        Self { value, partials }
    }

    pub fn dim(&self) -> usize {
        self.partials.len()
    }

    /// Chain rule for a scalar function with value `f` and derivative `df`
    /// at `self.value`.
    pub fn map(&self, f: C64, df: C64) -> Self {
        Self { value: f, partials: self.partials.iter().map(|p| p * df).collect() }
    }

    pub fn powi(&self, k: i32) -> Self {
        match k {
            0 => Self::constant(C64::new(1.0, 0.0), self.dim()),
            1 => self.clone(),
            _ => {
                let prev = self.value.powi(k - 1);
                self.map(prev * self.value, prev * k as f64)
            }
        }
    }
}

impl Add for &DualVector {
    type Output = DualVector;
    fn add(self, rhs: &DualVector) -> DualVector {
        DualVector {
            value: self.value + rhs.value,
            partials: self.partials.iter().zip(&rhs.partials).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &DualVector {
    type Output = DualVector;
    fn sub(self, rhs: &DualVector) -> DualVector {
        DualVector {
            value: self.value - rhs.value,
            partials: self.partials.iter().zip(&rhs.partials).map(|(a, b)| a - b).collect(),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for &DualVector {
    type Output = DualVector;
    fn mul(self, rhs: &DualVector) -> DualVector {
        DualVector {
            value: self.value * rhs.value,
            partials: self.partials.iter().zip(&rhs.partials).map(|(a, b)| a * rhs.value + self.value * b).collect(),
        }
    }
}

impl Div for &DualVector {
    type Output = DualVector;
    fn div(self, rhs: &DualVector) -> DualVector {
        let inv = C64::new(1.0, 0.0) / rhs.value;
        let quotient = self.value * inv;
        DualVector {
            value: quotient,
            partials: self.partials.iter().zip(&rhs.partials).map(|(a, b)| (a - quotient * b) * inv).collect(),
        }
    }
}

impl Neg for &DualVector {
    type Output = DualVector;
    fn neg(self) -> DualVector {
        DualVector { value: -self.value, partials: self.partials.iter().map(|p| -p).collect() }
    }
}
