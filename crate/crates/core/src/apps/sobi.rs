//! Joint diagonalization of lagged covariances `C_p = M D_p M^H` recast as a
//! structured factorization `Y = A B^T` with `b(ζ) = (u − iv) ⊗ (u + iv)`.

use serde::Serialize;

use crate::model::{ASpec, BinOp, ColumnModel, Domain, Expr, FactorModel, ScalingDeclaration, StructuredA, Transform};
use crate::rng::{complex_gaussian, real_gaussian, rng_for, Stream};
use crate::{CMatrix, CVector, C64};

use super::AppError;

/// Sensors `I = 3..9` covered by the bound table.
pub const TABLE_SENSORS: [usize; 7] = [3, 4, 5, 6, 7, 8, 9];
pub const EXPECTED_CHECKLIST: [usize; 7] = [4, 9, 16, 25, 36, 49, 64];
pub const EXPECTED_SOBIUM: [usize; 7] = [4, 9, 14, 21, 30, 40, 51];
pub const EXPECTED_ALG_GEOM: [usize; 7] = [3, 6, 10, 15, 21, 28, 36];

/// Mixing matrix `M` (`I×R`) and diagonals `D` (`P×R`, row `p` holds
/// `diag(D_p)`).
#[derive(Clone, Debug, PartialEq)]
pub struct SobiInstance {
    pub m: CMatrix,
    pub d: CMatrix,
    /// Row 1 of `D` is real (first lag is zero).
    pub tau1_zero: bool,
}

impl SobiInstance {
    pub fn new(m: CMatrix, d: CMatrix, tau1_zero: bool) -> Result<Self, AppError> {
        if m.ncols() != d.ncols() || m.nrows() == 0 || d.nrows() == 0 || m.ncols() == 0 {
            return Err(AppError::InvalidArgument(format!(
                "M is {}x{} and D is {}x{}",
                m.nrows(),
                m.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        if tau1_zero && d.row(0).iter().any(|z| z.im != 0.0) {
            return Err(AppError::InvalidArgument("tau1_zero requires a real first row of D".into()));
        }
        Ok(Self { m, d, tau1_zero })
    }

    /// Complex Gaussian `M` and `D`; with `tau1_zero` row 1 of `D` is real.
    pub fn random(i: usize, p: usize, r: usize, tau1_zero: bool, seed: u64) -> Self {
        let mut rng = rng_for(seed, Stream::GroundTruth, 0);
        let m = CMatrix::from_fn(i, r, |_, _| complex_gaussian(&mut rng));
        let mut d = CMatrix::zeros(p, r);
        for row in 0..p {
            for col in 0..r {
                d[(row, col)] =
                    if tau1_zero && row == 0 { real_gaussian(&mut rng) } else { complex_gaussian(&mut rng) };
            }
        }
        Self { m, d, tau1_zero }
    }

    pub fn sensors(&self) -> usize {
        self.m.nrows()
    }

    pub fn lags(&self) -> usize {
        self.d.nrows()
    }

    pub fn sources(&self) -> usize {
        self.m.ncols()
    }
}

/// `C_p = M D_p M^H` for every lag.
pub fn sobi_build(inst: &SobiInstance) -> Vec<CMatrix> {
    let mh = inst.m.adjoint();
    (0..inst.lags())
        .map(|p| {
            let mut md = inst.m.clone();
            for r in 0..inst.sources() {
                let d = inst.d[(p, r)];
                md.column_mut(r).iter_mut().for_each(|z| *z *= d);
            }
            md * &mh
        })
        .collect()
}

/// Column-major `vec`.
pub fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// `a ⊗ b` for column vectors.
pub fn kron(a: &CVector, b: &CVector) -> CVector {
    CVector::from_iterator(a.len() * b.len(), a.iter().flat_map(|x| b.iter().map(move |y| x * y)))
}

/// Stack `vec(Re C_p)^T` over `vec(Im C_p)^T`, where `Re C = (C + C^H)/2`
/// and `Im C = (C − C^H)/2i`; the result is `2P×I²`.
pub fn sobi_reformulate(c_list: &[CMatrix]) -> Result<CMatrix, AppError> {
    let Some(first) = c_list.first() else {
        return Err(AppError::InvalidArgument("no covariance matrices".into()));
    };
    let i = first.nrows();
    if c_list.iter().any(|c| c.nrows() != i || c.ncols() != i) {
        return Err(AppError::DimensionMismatch("all covariance matrices must be square and of the same size".into()));
    }
    let p = c_list.len();
    let two_i = C64::new(0.0, 2.0);
    let mut y = CMatrix::zeros(2 * p, i * i);
    for (k, c) in c_list.iter().enumerate() {
        let ch = c.adjoint();
        let re = (c + &ch) / C64::new(2.0, 0.0);
        let im = (c - &ch) / two_i;
        y.set_row(k, &vec_of(&re).transpose());
        y.set_row(p + k, &vec_of(&im).transpose());
    }
    Ok(y)
}

/// Factors with `Y = A B^T`: `A = [Re D; Im D]` (`2P×R`) and columns
/// `b_r = m_r^* ⊗ m_r` (`I²×R`).
pub fn sobi_factors(inst: &SobiInstance) -> (CMatrix, CMatrix) {
    let (p, r) = (inst.lags(), inst.sources());
    let mut a = CMatrix::zeros(2 * p, r);
    for row in 0..p {
        for col in 0..r {
            let d = inst.d[(row, col)];
            a[(row, col)] = C64::new(d.re, 0.0);
            a[(p + row, col)] = C64::new(d.im, 0.0);
        }
    }
    let cols: Vec<CVector> = (0..r)
        .map(|col| {
            let m = inst.m.column(col).into_owned();
            kron(&m.conjugate(), &m)
        })
        .collect();
    (a, CMatrix::from_columns(&cols))
}

/// `ζ = (u, v)` for the model column of `m = u + iv`.
pub fn sobi_zeta(m: &CVector) -> Vec<C64> {
    m.iter().map(|z| C64::new(z.re, 0.0)).chain(m.iter().map(|z| C64::new(z.im, 0.0))).collect()
}

/// Row `(j, i)` of `(u − iv) ⊗ (u + iv)`: `(x_j − i x_{I+j})(x_i + i x_{I+i})`.
fn sobi_rows(i: usize) -> Vec<Expr> {
    let imag = || Expr::Const(C64::new(0.0, 1.0));
    let half = |k: usize, op: BinOp| Expr::binary(op, Expr::var(k), Expr::binary(BinOp::Mul, imag(), Expr::var(i + k)));
    let mut rows = Vec::with_capacity(i * i);
    for j in 1..=i {
        for k in 1..=i {
            rows.push(Expr::binary(BinOp::Mul, half(j, BinOp::Sub), half(k, BinOp::Add)));
        }
    }
    rows
}

pub fn sobi_column(i: usize) -> Result<ColumnModel, AppError> {
    if i < 2 {
        return Err(AppError::InvalidArgument(format!("I = {i}, need I ≥ 2")));
    }
    Ok(ColumnModel::from_rows(2 * i, sobi_rows(i), Transform::identity(2 * i))?)
}

/// `K = 2P`, `N = I²`, `l = 2I`, real parameters, dense `A`, scaling
/// invariant. `R` defaults to [`sobi_bound`].
pub fn sobi_model(i: usize, p: usize) -> Result<FactorModel, AppError> {
    if p < 1 {
        return Err(AppError::InvalidArgument("P must be at least 1".into()));
    }
    let column = sobi_column(i)?;
    Ok(FactorModel::new(
        2 * p,
        sobi_bound(i, p, false)?,
        Domain::Real,
        ASpec::GenericDense,
        column,
        ScalingDeclaration::DeclaredTrue,
    )?)
}

/// Variant for `τ_1 = 0`: the row of `A` holding `Im D_1` is identically
/// zero and the remaining `(2P−1)R` entries are free.
pub fn sobi_model_tau1(i: usize, p: usize, r: usize) -> Result<FactorModel, AppError> {
    if p < 1 || r < 1 {
        return Err(AppError::InvalidArgument("P and R must be at least 1".into()));
    }
    let column = sobi_column(i)?;
    let mut entries = Vec::with_capacity(2 * p * r);
    let mut next = 1;
    for row in 0..2 * p {
        for _ in 0..r {
            if row == p {
                entries.push(Expr::constant(0.0));
            } else {
                entries.push(Expr::var(next));
                next += 1;
            }
        }
    }
    let a = StructuredA::new(2 * p, r, next - 1, entries)?;
    Ok(FactorModel::new(2 * p, r, Domain::Real, ASpec::Structured(a), column, ScalingDeclaration::DeclaredTrue)?)
}

/// `min(2P, (I−1)²)`, or `min(2P−1, (I−1)²)` when `τ_1 = 0`.
pub fn sobi_bound(i: usize, p: usize, tau1_zero: bool) -> Result<usize, AppError> {
    if i < 2 || p < 1 {
        return Err(AppError::InvalidArgument(format!("need I ≥ 2 and P ≥ 1, got I={i}, P={p}")));
    }
    let lags = if tau1_zero { 2 * p - 1 } else { 2 * p };
    Ok(lags.min((i - 1) * (i - 1)))
}

/// Largest `R` with `R(R−1) ≤ I²(I−1)²/2`.
pub fn sobium_bound(i: usize) -> usize {
    let cap = i * i * (i - 1) * (i - 1) / 2;
    let mut r = 0;
    while (r + 1) * r <= cap {
        r += 1;
    }
    r
}

/// `(I² − I)/2`.
pub fn alg_geom_bound(i: usize) -> usize {
    (i * i - i) / 2
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SobiTable {
    #[serde(rename = "I")]
    pub sensors: Vec<usize>,
    #[serde(rename = "thm2")]
    pub checklist: Vec<usize>,
    pub sobium: Vec<usize>,
    #[serde(rename = "algGeom")]
    pub alg_geom: Vec<usize>,
}

impl SobiTable {
    pub fn matches_expected(&self) -> bool {
        self.sensors == TABLE_SENSORS
            && self.checklist == EXPECTED_CHECKLIST
            && self.sobium == EXPECTED_SOBIUM
            && self.alg_geom == EXPECTED_ALG_GEOM
    }
}

/// Bounds on the number of sources for `I = 3..9`, with `P` large enough
/// that the lag count never binds.
pub fn sobi_table() -> SobiTable {
    let sensors = TABLE_SENSORS.to_vec();
    SobiTable {
        checklist: sensors.iter().map(|&i| sobi_bound(i, (i - 1) * (i - 1), false).expect("valid table entry")).collect(),
        sobium: sensors.iter().map(|&i| sobium_bound(i)).collect(),
        alg_geom: sensors.iter().map(|&i| alg_geom_bound(i)).collect(),
        sensors,
    }
}
