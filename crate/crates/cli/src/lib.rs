//! Command implementations behind the `genuniq` binary. Each command returns
//! its rendered report together with the process exit code, so the binary
//! only has to parse flags and write bytes.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use genuniq::apps::{
    cheb_p, example_model, exp_poly_model, identity_sweep, rational_model, sobi_model, sobi_table, tan_half_qr,
    IntPoly, SobiTable, SweepRow, MAX_DEGREE,
};
use genuniq::certify::{certify_generic_uniqueness_with, CertifyOptions, ChecklistReport, OverallVerdict};
use genuniq::solve::{empirical_uniqueness_test, EmpiricalReport, EmpiricalVerdict};
use genuniq::{parse_model, serialize_model, FactorModel, LmSettings, Tolerances};

pub const DEFAULT_SEED: u64 = 0xF4C701D;
pub const DEFAULT_RESTARTS: usize = 20;
pub const SCHEMA_VERSION: u32 = 1;
/// Largest error tolerated by the trigonometric identity sweep.
pub const TRIG_TOL: f64 = 1e-9;
const TRIG_POINTS: usize = 100;

pub mod exit {
    pub const PASS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const FAIL: i32 = 2;
    pub const INCONCLUSIVE: i32 = 3;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Effective settings of one invocation. Echoed into every JSON report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub restarts: usize,
    pub batch: Option<usize>,
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            restarts: DEFAULT_RESTARTS,
            batch: None,
            tolerances: Tolerances::default(),
            format: Format::Text,
        }
    }
}

impl RunConfig {
    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions { batch: self.batch, tolerances: self.tolerances, ..CertifyOptions::default() }
    }
}

/// Rendered report plus exit code.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub code: i32,
    pub body: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    report: &'a T,
}

fn render<T: Serialize>(cfg: &RunConfig, command: &str, report: &T, text: impl FnOnce(&T) -> String) -> Result<String> {
    Ok(match cfg.format {
        Format::Json => {
            let env = Envelope { schema_version: SCHEMA_VERSION, command, config: cfg, report };
            let mut s = serde_json::to_string_pretty(&env)?;
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = text(report);
            if !s.ends_with('\n') {
                s.push('\n');
            }
            s
        }
    })
}

pub fn load_model(path: &Path) -> Result<FactorModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_model(&text).with_context(|| format!("{}", path.display()))
}

pub fn certify_model(model: &FactorModel, cfg: &RunConfig) -> ChecklistReport {
    certify_generic_uniqueness_with(model, cfg.seed, &cfg.certify_options())
}

pub fn cmd_certify(path: &Path, cfg: &RunConfig) -> Result<Output> {
    let model = load_model(path)?;
    let report = certify_model(&model, cfg);
    let code = report.exit_code();
    let body = render(cfg, "certify", &report, ChecklistReport::to_string)?;
    Ok(Output { code, body })
}

pub fn verify_exit_code(verdict: EmpiricalVerdict) -> i32 {
    match verdict {
        EmpiricalVerdict::ConsistentWithUniqueness => exit::PASS,
        EmpiricalVerdict::CounterexampleFound => exit::FAIL,
        EmpiricalVerdict::Inconclusive => exit::INCONCLUSIVE,
    }
}

fn verify_text(r: &EmpiricalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "restarts: {}  converged: {}  matched: {}", r.restarts, r.converged, r.matched);
    if let Some(f) = r.match_fraction {
        let _ = writeln!(s, "match fraction: {f:.3}");
    }
    if r.degenerate {
        let _ = writeln!(s, "degenerate ground truth");
    }
    let verdict = match r.verdict {
        EmpiricalVerdict::ConsistentWithUniqueness => "consistent-with-uniqueness",
        EmpiricalVerdict::CounterexampleFound => "counterexample-found",
        EmpiricalVerdict::Inconclusive => "inconclusive",
    };
    let _ = writeln!(s, "seed: {:#x}", r.seed);
    let _ = write!(s, "verdict: {verdict} ({})", r.reason);
    s
}

pub fn cmd_verify(path: &Path, cfg: &RunConfig) -> Result<Output> {
    let model = load_model(path)?;
    if model.r() > model.k() {
        bail!("verify needs K >= R, model has K = {} and R = {}", model.k(), model.r());
    }
    let report = empirical_uniqueness_test(&model, cfg.seed, cfg.restarts, &LmSettings::default(), &cfg.tolerances)?;
    let code = verify_exit_code(report.verdict);
    let body = render(cfg, "verify", &report, verify_text)?;
    Ok(Output { code, body })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheckRow {
    #[serde(rename = "I")]
    pub sensors: usize,
    pub lags: usize,
    pub certified_max_r: Option<usize>,
    pub table: usize,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SobiTableReport {
    #[serde(flatten)]
    pub table: SobiTable,
    pub matches_expected: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cross_check: Vec<CrossCheckRow>,
}

/// Recompute the first table row through the certification pipeline.
pub fn sobi_cross_check(sensors: &[usize], lags: usize, cfg: &RunConfig) -> Result<Vec<CrossCheckRow>> {
    let table = sobi_table();
    sensors
        .iter()
        .map(|&i| {
            let expected = table
                .sensors
                .iter()
                .position(|&s| s == i)
                .map(|k| table.checklist[k])
                .with_context(|| format!("I = {i} is not in the table"))?;
            let model = sobi_model(i, lags)?;
            let rep = certify_model(&model, cfg);
            let got = if rep.verdict == OverallVerdict::Pass { rep.certified_max_r } else { None };
            Ok(CrossCheckRow { sensors: i, lags, certified_max_r: got, table: expected, agrees: got == Some(expected) })
        })
        .collect()
}

fn table_text(r: &SobiTableReport) -> String {
    let row = |label: &str, vals: &[usize]| {
        let cells: String = vals.iter().map(|v| format!("{v:>4}")).collect();
        format!("{label:<10}{cells}\n")
    };
    let t = &r.table;
    let mut s = String::new();
    s.push_str(&row("I", &t.sensors));
    s.push_str(&row("checklist", &t.checklist));
    s.push_str(&row("sobium", &t.sobium));
    s.push_str(&row("algGeom", &t.alg_geom));
    for c in &r.cross_check {
        let got = c.certified_max_r.map_or_else(|| "none".to_string(), |v| v.to_string());
        let _ = writeln!(
            s,
            "cross-check I={} P={}: certified {} vs table {} ({})",
            c.sensors,
            c.lags,
            got,
            c.table,
            if c.agrees { "agree" } else { "DISAGREE" }
        );
    }
    let _ = write!(s, "matches expected: {}", if r.matches_expected { "yes" } else { "no" });
    s
}

pub fn cmd_sobi_table(cross_check_lags: Option<usize>, cfg: &RunConfig) -> Result<Output> {
    let table = sobi_table();
    let matches_expected = table.matches_expected();
    let cross_check = match cross_check_lags {
        Some(p) => sobi_cross_check(&[3, 4, 5], p, cfg)?,
        None => Vec::new(),
    };
    let ok = matches_expected && cross_check.iter().all(|c| c.agrees);
    let report = SobiTableReport { table, matches_expected, cross_check };
    let body = render(cfg, "sobi-table", &report, table_text)?;
    Ok(Output { code: if ok { exit::PASS } else { exit::FAIL }, body })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstDegreeForms {
    pub p1: String,
    pub q1: String,
    pub r1: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrigReport {
    pub n_max: i64,
    pub points: usize,
    pub tolerance: f64,
    pub forms: FirstDegreeForms,
    pub rows: Vec<SweepRow>,
    pub all_within_tolerance: bool,
}

fn first_degree_forms() -> Result<FirstDegreeForms> {
    let p = cheb_p(1)?;
    let (q, r) = tan_half_qr(1)?;
    let ratio = |num: &IntPoly, den: &IntPoly| format!("({})/({})", num.render("t"), den.render("t"));
    Ok(FirstDegreeForms {
        p1: p.render("x"),
        q1: ratio(&q.numerator, &q.denominator),
        r1: ratio(&r.numerator, &r.denominator),
    })
}

fn row_ok(r: &SweepRow) -> bool {
    r.cheb_error < TRIG_TOL && r.q_error < TRIG_TOL && r.r_error < TRIG_TOL && r.pythagorean_exact
}

fn trig_text(r: &TrigReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "P_1(x) = {}", r.forms.p1);
    let _ = writeln!(s, "Q_1(t) = {}", r.forms.q1);
    let _ = writeln!(s, "R_1(t) = {}", r.forms.r1);
    let _ = writeln!(s, "{:>3}  {:>10}  {:>10}  {:>10}  exact", "n", "P err", "Q err", "R err");
    for row in &r.rows {
        let _ = writeln!(
            s,
            "{:>3}  {:>10.3e}  {:>10.3e}  {:>10.3e}  {}",
            row.n,
            row.cheb_error,
            row.q_error,
            row.r_error,
            if row.pythagorean_exact { "yes" } else { "no" }
        );
    }
    let _ = write!(s, "all within {:e}: {}", r.tolerance, if r.all_within_tolerance { "yes" } else { "no" });
    s
}

pub fn cmd_trig_check(n_max: i64, cfg: &RunConfig) -> Result<Output> {
    if !(1..=i64::from(MAX_DEGREE)).contains(&n_max) {
        bail!("n_max must lie in 1..={MAX_DEGREE}, got {n_max}");
    }
    let rows = identity_sweep(n_max, cfg.seed, TRIG_POINTS)?;
    let all_within_tolerance = rows.iter().all(row_ok);
    let report = TrigReport {
        n_max,
        points: TRIG_POINTS,
        tolerance: TRIG_TOL,
        forms: first_degree_forms()?,
        rows,
        all_within_tolerance,
    };
    let body = render(cfg, "trig-check", &report, trig_text)?;
    Ok(Output { code: if all_within_tolerance { exit::PASS } else { exit::FAIL }, body })
}

/// Model families that `emit-model` can write.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Sobi { sensors: usize, lags: usize },
    ExpPoly { degrees: Vec<usize>, n: usize },
    Rational { p: usize, q: usize, n: usize },
    Example { n: usize },
}

pub fn build_model(family: &Family, k: Option<usize>, r: Option<usize>) -> Result<FactorModel> {
    let mut model = match family {
        Family::Sobi { sensors, lags } => sobi_model(*sensors, *lags)?,
        Family::ExpPoly { degrees, n } => exp_poly_model(degrees, *n)?.model,
        Family::Rational { p, q, n } => rational_model(*p, *q, *n)?.model,
        Family::Example { n } => example_model(*n)?.model,
    };
    if let Some(k) = k {
        model = model.with_k(k)?;
    }
    if let Some(r) = r {
        model = model.with_r(r)?;
    }
    Ok(model)
}

pub fn cmd_emit_model(family: &Family, k: Option<usize>, r: Option<usize>) -> Result<Output> {
    let model = build_model(family, k, r)?;
    Ok(Output { code: exit::PASS, body: serialize_model(&model)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn json() -> RunConfig {
        RunConfig { format: Format::Json, ..RunConfig::default() }
    }

    #[test]
    fn table_default_passes() {
        let out = cmd_sobi_table(None, &RunConfig::default()).unwrap();
        assert_eq!(out.code, 0);
        assert!(out.body.contains("checklist"));
        let v: serde_json::Value = serde_json::from_str(&cmd_sobi_table(None, &json()).unwrap().body).unwrap();
        assert_eq!(v["report"]["algGeom"][0], 3);
        assert_eq!(v["schema_version"], 1);
    }

    #[test]
    fn trig_guard_and_forms() {
        assert!(cmd_trig_check(0, &RunConfig::default()).is_err());
        assert!(cmd_trig_check(100, &RunConfig::default()).is_err());
        let out = cmd_trig_check(1, &RunConfig::default()).unwrap();
        assert_eq!(out.code, 0);
        assert!(out.body.contains("Q_1(t) = (-t^2 + 1)/(t^2 + 1)"), "{}", out.body);
        assert!(out.body.contains("R_1(t) = (2*t)/(t^2 + 1)"));
    }

    #[test]
    fn emitted_models_parse_back() {
        let families = [
            Family::Sobi { sensors: 3, lags: 5 },
            Family::ExpPoly { degrees: vec![1], n: 10 },
            Family::Rational { p: 1, q: 1, n: 10 },
            Family::Example { n: 12 },
        ];
        for f in &families {
            let text = cmd_emit_model(f, None, None).unwrap().body;
            let back = parse_model(&text).unwrap();
            assert_eq!(back, build_model(f, None, None).unwrap(), "{f:?}");
        }
    }
}
