use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::POLE_EPS;
use crate::{CMatrix, C64};

use super::column::ColumnModel;
use super::expr::{Expr, RatExpr};
use super::ModelError;

/// Field the parameters live in. Arithmetic is always complex; the domain
/// only decides where generic samples are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Real,
    Complex,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Real => "real",
            Domain::Complex => "complex",
        })
    }
}

/// Whether `Range(r)` is closed under multiplication by complex scalars.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingDeclaration {
    DeclaredTrue,
    DeclaredFalse,
    Unknown,
}

impl fmt::Display for ScalingDeclaration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingDeclaration::DeclaredTrue => "true",
            ScalingDeclaration::DeclaredFalse => "false",
            ScalingDeclaration::Unknown => "unknown",
        })
    }
}

/// `A` given entrywise as expressions in its own `m` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredA {
    params: usize,
    entries: Vec<Expr>,
    expanded: Vec<RatExpr>,
    k: usize,
    r: usize,
}

impl StructuredA {
    /// `entries` is row-major `K×R`; variables index the `params` A-parameters.
    pub fn new(k: usize, r: usize, params: usize, entries: Vec<Expr>) -> Result<Self, ModelError> {
        if entries.len() != k * r {
            return Err(ModelError::DimensionMismatch(format!(
                "structured A needs {} entries, got {}",
                k * r,
                entries.len()
            )));
        }
        let mut expanded = Vec::with_capacity(entries.len());
        for e in &entries {
            if e.mentions_row() {
                return Err(ModelError::DimensionMismatch("entries of A may not use the row token".into()));
            }
            if e.max_var().is_some_and(|j| j >= params) {
                return Err(ModelError::DimensionMismatch(format!(
                    "entry of A references a parameter beyond m = {params}"
                )));
            }
            expanded.push(e.expand(0).map_err(|source| ModelError::Expand { row: 0, source })?);
        }
        Ok(Self { params, entries, expanded, k, r })
    }

    pub fn params(&self) -> usize {
        self.params
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn eval(&self, theta: &[C64]) -> Result<CMatrix, ModelError> {
        if theta.len() != self.params {
            return Err(ModelError::DimensionMismatch(format!(
                "structured A has {} parameters, got {}",
                self.params,
                theta.len()
            )));
        }
        let mut a = CMatrix::zeros(self.k, self.r);
        for (idx, e) in self.expanded.iter().enumerate() {
            a[(idx / self.r, idx % self.r)] =
                e.eval(theta, 0, POLE_EPS).map_err(|_| ModelError::Pole { row: idx / self.r + 1 })?;
        }
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ASpec {
    /// Unstructured `K×R` matrix of free parameters.
    GenericDense,
    Structured(StructuredA),
}

/// Complete problem instance `Y = A(z) B(z)^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel {
    k: usize,
    r: usize,
    domain: Domain,
    a_spec: ASpec,
    column: ColumnModel,
    scaling: ScalingDeclaration,
}

impl FactorModel {
    pub fn new(
        k: usize,
        r: usize,
        domain: Domain,
        a_spec: ASpec,
        column: ColumnModel,
        scaling: ScalingDeclaration,
    ) -> Result<Self, ModelError> {
        if k == 0 || r == 0 {
            return Err(ModelError::DimensionMismatch(format!("K and R must be positive, got K={k}, R={r}")));
        }
        if let ASpec::Structured(a) = &a_spec {
            if a.k != k || a.r != r {
                return Err(ModelError::DimensionMismatch(format!(
                    "structured A is {}x{} but the model is {k}x{r}",
                    a.k, a.r
                )));
            }
        }
        Ok(Self { k, r, domain, a_spec, column, scaling })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.column.n_rows()
    }

    pub fn l(&self) -> usize {
        self.column.l()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn a_spec(&self) -> &ASpec {
        &self.a_spec
    }

    pub fn column(&self) -> &ColumnModel {
        &self.column
    }

    pub fn scaling(&self) -> ScalingDeclaration {
        self.scaling
    }

    /// Parameters of `A`: its own `m`, or `K·R` free entries when dense.
    pub fn a_parameter_count(&self) -> usize {
        match &self.a_spec {
            ASpec::GenericDense => self.k * self.r,
            ASpec::Structured(a) => a.params,
        }
    }

    /// Total parameter count `m + R·l`.
    pub fn parameter_count(&self) -> usize {
        self.a_parameter_count() + self.r * self.l()
    }

    pub fn with_k(self, k: usize) -> Result<Self, ModelError> {
        Self::new(k, self.r, self.domain, self.a_spec, self.column, self.scaling)
    }

    /// Change `R`. A structured `A` is tied to its shape, so only dense
    /// models can be resized this way.
    pub fn with_r(self, r: usize) -> Result<Self, ModelError> {
        if matches!(self.a_spec, ASpec::Structured(_)) && r != self.r {
            return Err(ModelError::Unsupported("cannot resize a structured A; rebuild the model".into()));
        }
        Self::new(self.k, r, self.domain, self.a_spec, self.column, self.scaling)
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_scaling(mut self, scaling: ScalingDeclaration) -> Self {
        self.scaling = scaling;
        self
    }
}
