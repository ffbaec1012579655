//! Entrywise coordinate transforms `f(ζ) = (f_1(ζ_1), …, f_l(ζ_l))`.

use std::fmt;

use crate::{CMatrix, C64};

use super::ModelError;

/// `|cos(ζ/2)|` below this makes `tan_half` singular.
const TAN_HALF_GUARD: f64 = 1e-10;

/// Analytic, non-constant scalar primitives available to a coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    Identity,
    /// `ζ ↦ exp(c ζ)`; plain `exp` has `c = 1`.
    Exp(C64),
    /// `ζ ↦ tan(ζ/2)`.
    TanHalf,
    Cos,
    Sin,
    /// `ζ ↦ a + b ζ`.
    Affine(C64, C64),
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Identity => "id",
            Primitive::Exp(_) => "exp",
            Primitive::TanHalf => "tan_half",
            Primitive::Cos => "cos",
            Primitive::Sin => "sin",
            Primitive::Affine(..) => "affine",
        }
    }

    fn check(&self, z: C64, coord: usize) -> Result<(), ModelError> {
        if let Primitive::TanHalf = self {
            if (z * 0.5).cos().norm() < TAN_HALF_GUARD {
                return Err(ModelError::TransformSingular { coord: coord + 1 });
            }
        }
        Ok(())
    }

    pub fn apply(&self, z: C64) -> C64 {
        match *self {
            Primitive::Identity => z,
            Primitive::Exp(c) => (c * z).exp(),
            Primitive::TanHalf => (z * 0.5).tan(),
            Primitive::Cos => z.cos(),
            Primitive::Sin => z.sin(),
            Primitive::Affine(a, b) => a + b * z,
        }
    }

    pub fn derivative(&self, z: C64) -> C64 {
        match *self {
            Primitive::Identity => C64::new(1.0, 0.0),
            Primitive::Exp(c) => c * (c * z).exp(),
            Primitive::TanHalf => {
                let t = (z * 0.5).tan();
                (C64::new(1.0, 0.0) + t * t) * 0.5
            }
            Primitive::Cos => -z.sin(),
            Primitive::Sin => z.cos(),
            Primitive::Affine(_, b) => b,
        }
    }
}

fn fmt_param(c: C64) -> String {
    if c.im == 0.0 {
        format!("{:?}", c.re)
    } else if c.re == 0.0 {
        format!("{:?}*i", c.im)
    } else {
        format!("{:?} + {:?}*i", c.re, c.im)
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Primitive::Exp(c) if c == C64::new(1.0, 0.0) => write!(f, "exp"),
            Primitive::Exp(c) => write!(f, "exp({})", fmt_param(c)),
            Primitive::Affine(a, b) => write!(f, "affine({}, {})", fmt_param(a), fmt_param(b)),
            other => write!(f, "{}", other.name()),
        }
    }
}

/// One primitive per coordinate; coordinate `j` reads only `ζ_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    coords: Vec<Primitive>,
}

impl Transform {
    pub fn identity(l: usize) -> Self {
        Self { coords: vec![Primitive::Identity; l] }
    }

    pub fn new(coords: Vec<Primitive>) -> Self {
        Self { coords }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Primitive] {
        &self.coords
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|p| *p == Primitive::Identity)
    }

    fn check_len(&self, zeta: &[C64]) -> Result<(), ModelError> {
        if zeta.len() != self.coords.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "transform has {} coordinates, point has {}",
                self.coords.len(),
                zeta.len()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, zeta: &[C64]) -> Result<Vec<C64>, ModelError> {
        self.check_len(zeta)?;
        self.coords
            .iter()
            .zip(zeta)
            .enumerate()
            .map(|(j, (p, &z))| {
                p.check(z, j)?;
                Ok(p.apply(z))
            })
            .collect()
    }

    /// Diagonal of `J(f, ζ)`.
    pub fn derivatives(&self, zeta: &[C64]) -> Result<Vec<C64>, ModelError> {
        self.check_len(zeta)?;
        self.coords
            .iter()
            .zip(zeta)
            .enumerate()
            .map(|(j, (p, &z))| {
                p.check(z, j)?;
                Ok(p.derivative(z))
            })
            .collect()
    }

    /// `J(f, ζ)` as an `l×l` diagonal matrix.
    pub fn jacobian(&self, zeta: &[C64]) -> Result<CMatrix, ModelError> {
        let d = self.derivatives(zeta)?;
        Ok(CMatrix::from_diagonal(&crate::CVector::from_vec(d)))
    }
}
