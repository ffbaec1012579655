use serde::Serialize;

use crate::{CMatrix, C64};

use super::varpro::Decomposition;
use super::SolveError;

/// Best alignment of the rank-1 terms of two decompositions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    /// Term `r` of the first decomposition pairs with term `permutation[r]`
    /// of the second.
    pub permutation: Vec<usize>,
    /// `λ_r` with `b̂_{π(r)} ≈ λ_r b_r`.
    pub scales: Vec<C64>,
    /// Largest relative difference between paired rank-1 terms.
    pub discrepancy: f64,
    pub matched: bool,
}

/// `‖T1 − T2‖ / max(‖T1‖, ‖T2‖)`; symmetric in its arguments.
fn term_distance(t1: &CMatrix, t2: &CMatrix) -> f64 {
    let denom = t1.norm().max(t2.norm());
    if denom == 0.0 {
        return 0.0;
    }
    (t1 - t2).norm() / denom
}

/// Whether every row can be assigned a distinct column with cost `≤ bound`.
fn perfect_matching(cost: &[Vec<f64>], bound: f64) -> Option<Vec<usize>> {
    let n = cost.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(row: usize, cost: &[Vec<f64>], bound: f64, seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for col in 0..cost.len() {
            if cost[row][col] <= bound && !seen[col] {
                seen[col] = true;
                if owner[col].is_none_or(|other| augment(other, cost, bound, seen, owner)) {
                    owner[col] = Some(row);
                    return true;
                }
            }
        }
        false
    }
    for row in 0..n {
        let mut seen = vec![false; n];
        if !augment(row, cost, bound, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut perm = vec![0; n];
    for (col, row) in owner.iter().enumerate() {
        perm[row.expect("perfect matching")] = col;
    }
    Some(perm)
}

/// Greedy pass for an upper bound, then the exact bottleneck assignment by
/// searching the sorted cost values.
fn bottleneck_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    let mut used = vec![false; n];
    let mut greedy = 0.0f64;
    for row in cost {
        let (col, c) = row
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, c)| (j, *c))
            .expect("free column");
        used[col] = true;
        greedy = greedy.max(c);
    }
    let mut values: Vec<f64> = cost.iter().flatten().copied().filter(|&c| c <= greedy).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let (mut lo, mut hi) = (0, values.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(cost, values[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let perm = perfect_matching(cost, values[lo]).expect("greedy bound is feasible");
    (perm, values[lo])
}

/// Compare two decompositions up to permutation and scaling of their rank-1
/// terms; `matched` iff the worst paired term differs by less than `tol`.
pub fn match_decompositions(d1: &Decomposition, d2: &Decomposition, tol: f64) -> Result<MatchResult, SolveError> {
    if d1.a.shape() != d2.a.shape() || d1.b.shape() != d2.b.shape() {
        return Err(SolveError::DimensionMismatch(format!(
            "decompositions differ in shape: A {:?} vs {:?}, B {:?} vs {:?}",
            d1.a.shape(),
            d2.a.shape(),
            d1.b.shape(),
            d2.b.shape()
        )));
    }
    let r = d1.r();
    if r == 0 {
        return Err(SolveError::InvalidArgument("empty decomposition".into()));
    }
    let t1: Vec<CMatrix> = (0..r).map(|i| d1.term(i)).collect();
    let t2: Vec<CMatrix> = (0..r).map(|i| d2.term(i)).collect();
    let cost: Vec<Vec<f64>> = t1.iter().map(|a| t2.iter().map(|b| term_distance(a, b)).collect()).collect();
    let (permutation, discrepancy) = bottleneck_assignment(&cost);
    let scales = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let b = d1.b.column(i);
            let bh = d2.b.column(j);
            b.dotc(&bh) / b.norm_squared()
        })
        .collect();
    Ok(MatchResult { permutation, scales, discrepancy, matched: discrepancy < tol })
}
