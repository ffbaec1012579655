//! The generic-uniqueness checklist: six assumptions, a certified maximal
//! `R`, and an overall verdict.

mod condition2;
mod scaling;

use std::fmt;

use serde::Serialize;

use crate::config::{LmSettings, Tolerances};
use crate::model::{ASpec, Domain, FactorModel, ModelError, ScalingDeclaration};
use crate::numrank::{
    a_full_rank_probe, generic_jacobian_rank, numeric_rank, span_dimension, NumRankError, RankEvidence,
};
use crate::rng::{gaussian_vec, rng_for, Stream};
use crate::solve::SolveError;

pub use condition2::{condition2_falsifier, probe_combination, Condition2Probe, Condition2Trial};
pub use scaling::{scaling_probe, ScalingProbe, ScalingTrial, ScalingVerdict, STUCK_RESIDUAL};

pub const SCHEMA_VERSION: u32 = 1;
/// Draws tried before the transform Jacobian check gives up.
pub const TRANSFORM_DRAWS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum CertifyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverallVerdict {
    Pass,
    FailBound,
    FailAssumption,
    Inconclusive,
}

impl OverallVerdict {
    pub fn exit_code(self) -> i32 {
        match self {
            OverallVerdict::Pass => 0,
            OverallVerdict::FailBound | OverallVerdict::FailAssumption => 2,
            OverallVerdict::Inconclusive => 3,
        }
    }
}

impl fmt::Display for OverallVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverallVerdict::Pass => "pass",
            OverallVerdict::FailBound => "fail-bound",
            OverallVerdict::FailAssumption => "fail-assumption",
            OverallVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Evidence {
    Rank(RankEvidence),
    Primitives { coords: Vec<String> },
    TransformJacobian { draws: usize, rejected_draws: usize, rank: usize, l: usize, abs_det: f64 },
    Bound { r: usize, k: usize, bound_if_invariant: usize, bound_otherwise: usize, certified_max_r: Option<usize> },
    Skipped { reason: String },
    Error { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionEntry {
    pub id: u8,
    pub name: &'static str,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub evidence: Evidence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingSource {
    Declared,
    Probed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingStatus {
    /// `None` when the probe could not decide.
    pub value: Option<bool>,
    pub source: ScalingSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ScalingProbe>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSummary {
    pub k: usize,
    pub r: usize,
    pub n: usize,
    pub l: usize,
    pub domain: Domain,
    pub a: &'static str,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertifyOptions {
    /// Span sample count per batch; `None` means `N + 32`.
    pub batch: Option<usize>,
    pub jacobian_trials: usize,
    pub a_trials: usize,
    pub scaling_trials: usize,
    pub projection_starts: usize,
    pub tolerances: Tolerances,
    pub lm: LmSettings,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            batch: None,
            jacobian_trials: 10,
            a_trials: 5,
            scaling_trials: 5,
            projection_starts: 8,
            tolerances: Tolerances::default(),
            lm: LmSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChecklistReport {
    pub schema_version: u32,
    pub model: ModelSummary,
    pub assumptions: Vec<AssumptionEntry>,
    pub n_hat: Option<usize>,
    pub l_hat: Option<usize>,
    pub scaling_invariant: ScalingStatus,
    pub certified_max_r: Option<usize>,
    pub r: usize,
    pub verdict: OverallVerdict,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub options: CertifyOptions,
}

impl ChecklistReport {
    pub fn assumption(&self, id: u8) -> &AssumptionEntry {
        &self.assumptions[usize::from(id) - 1]
    }

    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }
}

/// `min(K, N̂ − l̂)` for scaling-invariant ranges, `min(K, N̂ − l̂ − 1)` otherwise.
pub fn certified_bound(k: usize, n_hat: usize, l_hat: usize, invariant: bool) -> usize {
    let base = n_hat.saturating_sub(l_hat);
    let base = if invariant { base } else { base.saturating_sub(1) };
    k.min(base)
}

fn entry(id: u8, name: &'static str, verdict: Verdict, note: Option<String>, evidence: Evidence) -> AssumptionEntry {
    AssumptionEntry { id, name, verdict, note, evidence }
}

fn rank_failure(id: u8, name: &'static str, e: NumRankError) -> AssumptionEntry {
    entry(id, name, Verdict::Inconclusive, None, Evidence::Error { message: e.to_string() })
}

fn check_a(model: &FactorModel, seed: u64, opts: &CertifyOptions) -> AssumptionEntry {
    const NAME: &str = "A has full column rank";
    let ev = match a_full_rank_probe(model, seed, opts.a_trials, opts.tolerances.rank_tol) {
        Ok(ev) => ev,
        Err(e) => return rank_failure(1, NAME, e),
    };
    let (k, r) = (model.k(), model.r());
    let (verdict, note) = if k < r {
        (Verdict::Fail, Some(format!("K = {k} < R = {r}")))
    } else if matches!(model.a_spec(), ASpec::GenericDense) {
        (Verdict::Pass, Some("generic dense A with K >= R".to_string()))
    } else if !ev.agreement {
        (Verdict::Inconclusive, Some("batches disagree".to_string()))
    } else if ev.estimate == r {
        (Verdict::Pass, None)
    } else {
        (Verdict::Fail, Some(format!("generic rank {} < R = {r}", ev.estimate)))
    };
    entry(1, NAME, verdict, note, Evidence::Rank(ev))
}

fn check_primitives(model: &FactorModel) -> AssumptionEntry {
    let coords = model.column().transform().coords().iter().map(|p| p.name().to_string()).collect();
    entry(2, "f is entrywise analytic", Verdict::Pass, None, Evidence::Primitives { coords })
}

fn check_transform(model: &FactorModel, seed: u64, opts: &CertifyOptions) -> AssumptionEntry {
    const NAME: &str = "det J(f, z) is nonzero";
    let cm = model.column();
    let l = cm.l();
    let mut rejected = 0;
    let mut last = None;
    for draw in 0..TRANSFORM_DRAWS {
        let mut rng = rng_for(seed, Stream::TransformJacobian, draw as u64);
        let zeta = gaussian_vec(&mut rng, l, Domain::Complex);
        let Ok(jf) = cm.jacobian_f(&zeta) else {
            rejected += 1;
            continue;
        };
        let rank = numeric_rank(&jf, opts.tolerances.rank_tol).unwrap_or(0);
        let abs_det = jf.determinant().norm();
        last = Some((rank, abs_det));
        if rank == l {
            return entry(
                3,
                NAME,
                Verdict::Pass,
                None,
                Evidence::TransformJacobian { draws: draw + 1, rejected_draws: rejected, rank, l, abs_det },
            );
        }
    }
    let (verdict, rank, abs_det) = match last {
        Some((rank, abs_det)) => (Verdict::Fail, rank, abs_det),
        None => (Verdict::Inconclusive, 0, 0.0),
    };
    entry(
        3,
        NAME,
        verdict,
        None,
        Evidence::TransformJacobian { draws: TRANSFORM_DRAWS, rejected_draws: rejected, rank, l, abs_det },
    )
}

fn rank_entry(
    id: u8,
    name: &'static str,
    result: Result<RankEvidence, NumRankError>,
) -> (AssumptionEntry, Option<usize>) {
    match result {
        Ok(ev) if ev.agreement => {
            let value = ev.estimate;
            (entry(id, name, Verdict::Pass, None, Evidence::Rank(ev)), Some(value))
        }
        Ok(ev) => (
            entry(
                id,
                name,
                Verdict::Inconclusive,
                Some(format!("batches disagree: {:?}", ev.batch_estimates)),
                Evidence::Rank(ev),
            ),
            None,
        ),
        Err(e) => (rank_failure(id, name, e), None),
    }
}

fn resolve_scaling(model: &FactorModel, seed: u64, opts: &CertifyOptions) -> ScalingStatus {
    let declared = |value| ScalingStatus { value: Some(value), source: ScalingSource::Declared, probe: None };
    match model.scaling() {
        ScalingDeclaration::DeclaredTrue => declared(true),
        ScalingDeclaration::DeclaredFalse => declared(false),
        ScalingDeclaration::Unknown => {
            let cm = model.column().clone().with_pole_eps(opts.tolerances.pole_eps);
            match scaling_probe(&cm, seed, opts.scaling_trials, opts.projection_starts, &opts.lm, &opts.tolerances) {
                Ok(probe) => ScalingStatus {
                    value: match probe.verdict {
                        ScalingVerdict::Invariant => Some(true),
                        ScalingVerdict::NotInvariant => Some(false),
                        ScalingVerdict::Inconclusive => None,
                    },
                    source: ScalingSource::Probed,
                    probe: Some(probe),
                },
                Err(_) => ScalingStatus { value: None, source: ScalingSource::Probed, probe: None },
            }
        }
    }
}

/// Run the checklist with default options.
pub fn certify_generic_uniqueness(model: &FactorModel, seed: u64) -> ChecklistReport {
    certify_generic_uniqueness_with(model, seed, &CertifyOptions::default())
}

pub fn certify_generic_uniqueness_with(model: &FactorModel, seed: u64, opts: &CertifyOptions) -> ChecklistReport {
    let tols = opts.tolerances;
    let cm = model.column().clone().with_pole_eps(tols.pole_eps);
    let batch = opts.batch.unwrap_or(model.n() + 32);

    let ((a1, a3), ((a4, n_hat), (a5, l_hat))) = rayon::join(
        || (check_a(model, seed, opts), check_transform(model, seed, opts)),
        || {
            rayon::join(
                || {
                    rank_entry(
                        4,
                        "span of Range(r) has dimension N-hat",
                        span_dimension(&cm, seed, batch, tols.rank_tol),
                    )
                },
                || {
                    rank_entry(
                        5,
                        "generic rank of J(r, x) is l-hat",
                        generic_jacobian_rank(&cm, seed, opts.jacobian_trials, tols.rank_tol),
                    )
                },
            )
        },
    );
    let a2 = check_primitives(model);

    let first_five = [&a1, &a2, &a3, &a4, &a5];
    let all_pass = first_five.iter().all(|e| e.verdict == Verdict::Pass);
    let any_fail = first_five.iter().any(|e| e.verdict == Verdict::Fail);

    let scaling = if all_pass {
        resolve_scaling(model, seed, opts)
    } else {
        ScalingStatus {
            value: match model.scaling() {
                ScalingDeclaration::DeclaredTrue => Some(true),
                ScalingDeclaration::DeclaredFalse => Some(false),
                ScalingDeclaration::Unknown => None,
            },
            source: if model.scaling() == ScalingDeclaration::Unknown {
                ScalingSource::Probed
            } else {
                ScalingSource::Declared
            },
            probe: None,
        }
    };

    const A6: &str = "R within the certified bound";
    let (k, r) = (model.k(), model.r());
    let (a6, certified_max_r) = match (all_pass, n_hat, l_hat) {
        (true, Some(nh), Some(lh)) => {
            let if_inv = certified_bound(k, nh, lh, true);
            let otherwise = certified_bound(k, nh, lh, false);
            let certified = if scaling.value == Some(true) { if_inv } else { otherwise };
            let (verdict, note) = if r <= certified {
                (Verdict::Pass, None)
            } else if scaling.value.is_none() && r <= if_inv {
                (
                    Verdict::Inconclusive,
                    Some("R fits only if Range(r) is scaling invariant, which is undecided".to_string()),
                )
            } else {
                (Verdict::Fail, Some(format!("R = {r} exceeds {certified}")))
            };
            let ev = Evidence::Bound {
                r,
                k,
                bound_if_invariant: if_inv,
                bound_otherwise: otherwise,
                certified_max_r: Some(certified),
            };
            (entry(6, A6, verdict, note, ev), Some(certified))
        }
        _ => (
            entry(
                6,
                A6,
                Verdict::Inconclusive,
                None,
                Evidence::Skipped { reason: "assumptions 1-5 did not all pass".into() },
            ),
            None,
        ),
    };

    let verdict = if any_fail {
        OverallVerdict::FailAssumption
    } else if !all_pass {
        OverallVerdict::Inconclusive
    } else {
        match a6.verdict {
            Verdict::Pass => OverallVerdict::Pass,
            Verdict::Fail => OverallVerdict::FailBound,
            Verdict::Inconclusive => OverallVerdict::Inconclusive,
        }
    };

    ChecklistReport {
        schema_version: SCHEMA_VERSION,
        model: ModelSummary {
            k,
            r,
            n: model.n(),
            l: model.l(),
            domain: model.domain(),
            a: match model.a_spec() {
                ASpec::GenericDense => "generic",
                ASpec::Structured(_) => "structured",
            },
        },
        assumptions: vec![a1, a2, a3, a4, a5, a6],
        n_hat,
        l_hat,
        scaling_invariant: scaling,
        certified_max_r,
        r,
        verdict,
        seed,
        tolerances: tols,
        options: *opts,
    }
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl fmt::Display for ChecklistReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.model;
        writeln!(f, "model: K={} R={} N={} l={} domain={} A={}", m.k, m.r, m.n, m.l, m.domain, m.a)?;
        for a in &self.assumptions {
            write!(f, "  [{}] {:<13} {}", a.id, a.verdict, a.name)?;
            if let Some(note) = &a.note {
                write!(f, " ({note})")?;
            }
            writeln!(f)?;
        }
        let scaling = match self.scaling_invariant.value {
            Some(true) => "yes",
            Some(false) => "no",
            None => "undecided",
        };
        let source = match self.scaling_invariant.source {
            ScalingSource::Declared => "declared",
            ScalingSource::Probed => "probed",
        };
        writeln!(f, "N-hat: {}  l-hat: {}", opt(self.n_hat), opt(self.l_hat))?;
        writeln!(f, "scaling invariant: {scaling} ({source})")?;
        writeln!(f, "certified max R: {}", opt(self.certified_max_r))?;
        writeln!(f, "seed: {:#x}", self.seed)?;
        write!(f, "verdict: {}", self.verdict)
    }
}
