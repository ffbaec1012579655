//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use genuniq::apps::{
    cheb_p, example_model, example_signal, exp_poly_model, identity_sweep, kron, pythagorean_residual, rational_model,
    sobi_build, sobi_column, sobi_factors, sobi_model, sobi_reformulate, tan_half_qr, vec_of, SobiInstance,
};
use genuniq::certify::{certify_generic_uniqueness, ChecklistReport, Evidence, OverallVerdict};
use genuniq::rng::{complex_gaussian, derive_seed, rng_for, Stream};
use genuniq::solve::{empirical_uniqueness_test, EmpiricalVerdict};
use genuniq::{CMatrix, CVector, ColumnModel, LmSettings, Tolerances, C64};
use genuniq_cli::{cmd_sobi_table, Format, RunConfig, DEFAULT_SEED};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

fn rank_agrees(rep: &ChecklistReport, id: u8) -> Result<(), String> {
    match &rep.assumption(id).evidence {
        Evidence::Rank(ev) if ev.agreement => Ok(()),
        other => Err(format!("assumption {id} lacks two-batch agreement: {other:?}")),
    }
}

fn expect_certified(rep: &ChecklistReport, n_hat: usize, l_hat: usize, bound: usize) -> Result<(), String> {
    ensure(rep.n_hat == Some(n_hat), || format!("N-hat {:?}, expected {n_hat}", rep.n_hat))?;
    ensure(rep.l_hat == Some(l_hat), || format!("l-hat {:?}, expected {l_hat}", rep.l_hat))?;
    ensure(rep.scaling_invariant.value == Some(true), || "not scaling invariant".into())?;
    ensure(rep.certified_max_r == Some(bound), || format!("certified {:?}, expected {bound}", rep.certified_max_r))?;
    ensure(rep.verdict == OverallVerdict::Pass, || format!("verdict {}", rep.verdict))?;
    rank_agrees(rep, 4)?;
    rank_agrees(rep, 5)
}

fn table_reproduction() -> Check {
    let start = Instant::now();
    let text = cmd_sobi_table(None, &RunConfig::default()).map_err(|e| e.to_string())?;
    let cfg = RunConfig { format: Format::Json, ..RunConfig::default() };
    let json = cmd_sobi_table(None, &cfg).map_err(|e| e.to_string())?;
    within(start.elapsed(), 1.0)?;
    ensure(text.code == 0 && json.code == 0, || "table command did not exit 0".into())?;
    let v: serde_json::Value = serde_json::from_str(&json.body).map_err(|e| e.to_string())?;
    let rows = [
        ("thm2", [4, 9, 16, 25, 36, 49, 64]),
        ("sobium", [4, 9, 14, 21, 30, 40, 51]),
        ("algGeom", [3, 6, 10, 15, 21, 28, 36]),
    ];
    for (key, expected) in rows {
        let got: Vec<u64> =
            v["report"][key].as_array().ok_or(format!("missing {key}"))?.iter().filter_map(|x| x.as_u64()).collect();
        let want: Vec<u64> = expected.iter().map(|&x| x as u64).collect();
        ensure(got == want, || format!("{key}: {got:?} vs {want:?}"))?;
    }
    Ok("21 values match".into())
}

fn sobi_certification() -> Check {
    let mut parts = Vec::new();
    for i in 3..=5usize {
        let start = Instant::now();
        let model = sobi_model(i, 40).map_err(|e| e.to_string())?;
        let rep = certify_generic_uniqueness(&model, DEFAULT_SEED);
        within(start.elapsed(), 30.0)?;
        expect_certified(&rep, i * i, 2 * i - 1, (i - 1) * (i - 1)).map_err(|e| format!("I = {i}: {e}"))?;
        parts.push(format!("I={i}: {}", (i - 1) * (i - 1)));
    }
    Ok(parts.join(", "))
}

fn exp_poly_bound() -> Check {
    let start = Instant::now();
    let model = exp_poly_model(&[1], 10).and_then(|b| Ok(b.model.with_k(7)?)).map_err(|e| e.to_string())?;
    let rep = certify_generic_uniqueness(&model, DEFAULT_SEED);
    within(start.elapsed(), 10.0)?;
    expect_certified(&rep, 10, 3, 7)?;
    Ok("certified max R = 7".into())
}

fn rational_bound() -> Check {
    let start = Instant::now();
    let model = rational_model(1, 1, 10).and_then(|b| Ok(b.model.with_k(10)?)).map_err(|e| e.to_string())?;
    let rep = certify_generic_uniqueness(&model, DEFAULT_SEED);
    expect_certified(&rep, 10, 3, 7)?;
    // x itself spans the null space: r is homogeneous of degree 0 in x.
    let cm = model.column();
    let mut worst = 0.0f64;
    for k in 0..20 {
        let mut rng = rng_for(DEFAULT_SEED, Stream::Validation, k);
        let x: Vec<C64> = (0..cm.l()).map(|_| complex_gaussian(&mut rng)).collect();
        let j = cm.jacobian_r(&x).map_err(|e| e.to_string())?;
        let xv = CVector::from_column_slice(&x);
        let ratio = (&j * &xv).norm() / (j.norm() * xv.norm());
        worst = worst.max(ratio);
    }
    within(start.elapsed(), 10.0)?;
    ensure(worst < 1e-10, || format!("null-vector ratio {worst:e}"))?;
    Ok(format!("certified max R = 7, l-hat = 3, worst |Jx|/(|J||x|) = {worst:.1e}"))
}

fn worked_example() -> Check {
    let start = Instant::now();
    let model = example_model(20).map_err(|e| e.to_string())?.model;
    let rep = certify_generic_uniqueness(&model, DEFAULT_SEED);
    expect_certified(&rep, 20, 6, 14)?;
    let cm = model.column();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut idx = 0u64;
    while checked < 20 {
        let mut rng = rng_for(DEFAULT_SEED, Stream::Validation, 1000 + idx);
        idx += 1;
        let zeta: Vec<C64> = [
            rng.random_range(0.5..1.1),
            rng.random_range(-2.0..2.0),
            rng.random_range(0.5..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        ]
        .iter()
        .map(|&v| C64::new(v, 0.0))
        .collect();
        let Ok(b) = cm.eval_b(&zeta) else {
            continue;
        };
        for t in 1..=20 {
            let direct = example_signal(&zeta, t as f64);
            let err = (b[t - 1] - direct).norm() / direct.norm().max(1.0);
            worst = worst.max(err);
        }
        checked += 1;
    }
    within(start.elapsed(), 20.0)?;
    ensure(worst < 1e-10, || format!("eval_b vs direct form: {worst:e}"))?;
    Ok(format!("certified max R = 14, worst signal error {worst:.1e}"))
}

fn trig_identities() -> Check {
    let start = Instant::now();
    let rows = identity_sweep(20, DEFAULT_SEED, 100).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for row in &rows {
        worst = worst.max(row.cheb_error).max(row.q_error).max(row.r_error);
        ensure(row.pythagorean_exact, || format!("n = {}: Q^2 + R^2 != 1", row.n))?;
    }
    for n in 1..=20 {
        ensure(pythagorean_residual(n).map_err(|e| e.to_string())?.is_zero(), || {
            format!("integer identity fails at n = {n}")
        })?;
    }
    // Independent oracle: P_n(cos z) at a few points in plain f64.
    for n in 1..=20i64 {
        let p = cheb_p(n).map_err(|e| e.to_string())?;
        let (q, _) = tan_half_qr(n).map_err(|e| e.to_string())?;
        for z in [0.3f64, -1.7, 2.9] {
            let c = (n as f64 * z).cos();
            ensure((p.eval_f64(z.cos()) - c).abs() < 1e-9, || format!("P_{n}"))?;
            ensure((q.eval_f64((z / 2.0).tan()) - c).abs() < 1e-9, || format!("Q_{n}"))?;
        }
    }
    within(start.elapsed(), 5.0)?;
    ensure(rows.len() == 20 && worst < 1e-9, || format!("worst error {worst:e}"))?;
    Ok(format!("n <= 20, worst error {worst:.1e}"))
}

fn reformulation_identities() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let inst = SobiInstance::random(
            3 + (k as usize % 3),
            4,
            2 + (k as usize % 3),
            k % 2 == 1,
            derive_seed(DEFAULT_SEED, Stream::Validation, k),
        );
        for r in 0..inst.sources() {
            let m = inst.m.column(r).into_owned();
            let outer: CMatrix = &m * m.adjoint();
            let diff = (vec_of(&outer) - kron(&m.conjugate(), &m)).norm() / outer.norm();
            worst = worst.max(diff);
        }
        let y = sobi_reformulate(&sobi_build(&inst)).map_err(|e| e.to_string())?;
        let (a, b) = sobi_factors(&inst);
        worst = worst.max((&y - a * b.transpose()).norm() / y.norm());
        // The model's columns are the same Kronecker vectors.
        let cm: ColumnModel = sobi_column(inst.sensors()).map_err(|e| e.to_string())?;
        for r in 0..inst.sources() {
            let m = inst.m.column(r).into_owned();
            let col = cm.eval_b(&genuniq::apps::sobi_zeta(&m)).map_err(|e| e.to_string())?;
            worst = worst.max((col - b.column(r)).norm() / b.column(r).norm());
        }
    }
    within(start.elapsed(), 1.0)?;
    ensure(worst < 1e-12, || format!("worst relative residual {worst:e}"))?;
    Ok(format!("20 instances, worst relative residual {worst:.1e}"))
}

fn empirical_uniqueness() -> Check {
    let start = Instant::now();
    let model = rational_model(1, 1, 12).and_then(|b| Ok(b.model.with_k(5)?.with_r(2)?)).map_err(|e| e.to_string())?;
    let tols = Tolerances::default();
    let mut converged = 0;
    let mut worst: f64 = 0.0;
    for inst in 0..5u64 {
        let seed = derive_seed(DEFAULT_SEED, Stream::Validation, inst);
        let rep =
            empirical_uniqueness_test(&model, seed, 20, &LmSettings::default(), &tols).map_err(|e| e.to_string())?;
        ensure(!rep.degenerate, || format!("instance {inst} is degenerate"))?;
        for rec in rep.records.iter().filter(|r| r.converged) {
            ensure(rec.residual < 1e-8, || format!("instance {inst}: converged residual {}", rec.residual))?;
            ensure(rec.matched == Some(true), || {
                format!("instance {inst} start {}: fit differs from truth ({:?})", rec.start, rec.discrepancy)
            })?;
            worst = worst.max(rec.discrepancy.unwrap_or(f64::INFINITY));
        }
        converged += rep.converged;
        ensure(rep.verdict == EmpiricalVerdict::ConsistentWithUniqueness, || {
            format!("instance {inst}: {}", rep.reason)
        })?;
    }
    within(start.elapsed(), 120.0)?;
    ensure(worst < 1e-6, || format!("discrepancy {worst:e}"))?;
    Ok(format!("{converged}/100 fits converged, all match, worst discrepancy {worst:.1e}"))
}

fn ad_validation() -> Check {
    let start = Instant::now();
    let families: Vec<ColumnModel> = vec![
        sobi_column(3).map_err(|e| e.to_string())?,
        sobi_column(5).map_err(|e| e.to_string())?,
        exp_poly_model(&[1], 10).map_err(|e| e.to_string())?.model.column().clone(),
        exp_poly_model(&[0, 1], 12).map_err(|e| e.to_string())?.model.column().clone(),
        rational_model(1, 1, 10).map_err(|e| e.to_string())?.model.column().clone(),
        rational_model(2, 2, 14).map_err(|e| e.to_string())?.model.column().clone(),
        example_model(20).map_err(|e| e.to_string())?.model.column().clone(),
    ];
    let mut worst = 0.0f64;
    for idx in 0..50u64 {
        let cm = &families[idx as usize % families.len()];
        let mut rng = rng_for(DEFAULT_SEED, Stream::Validation, 5000 + idx);
        let x = loop {
            let x: Vec<C64> = (0..cm.l()).map(|_| complex_gaussian(&mut rng) * 0.8).collect();
            if cm.eval_r(&x).is_ok() {
                break x;
            }
        };
        let ad = cm.jacobian_r(&x).map_err(|e| e.to_string())?;
        let scale = ad.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for k in 0..x.len() {
            let h = 1e-5 * x[k].norm().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (cm.eval_r(&xp).map_err(|e| e.to_string())? - cm.eval_r(&xm).map_err(|e| e.to_string())?)
                / C64::new(2.0 * h, 0.0);
            for (n, f) in fd.iter().enumerate() {
                let a = ad[(n, k)];
                // Entries many orders below the largest one are judged against 1e-6 of it.
                let err = (a - f).norm() / a.norm().max(1e-6 * scale);
                worst = worst.max(err);
            }
        }
    }
    within(start.elapsed(), 5.0)?;
    ensure(worst < 1e-5, || format!("worst relative entry error {worst:e}"))?;
    Ok(format!("50 pairs over 7 families, worst relative entry error {worst:.1e}"))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_genuniq");
    let run = |args: &[&str]| -> Result<Vec<u8>, String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        Ok(out.stdout)
    };
    let model = dir.path().join("m.txt");
    let model_s = model.to_str().unwrap();
    let emitted = Command::new(bin)
        .args(["emit-model", "rational", "--p", "1", "--q", "1", "--n", "12", "--k", "5", "--r", "2", "--out", model_s])
        .status()
        .map_err(|e| e.to_string())?;
    ensure(emitted.success(), || "emit-model failed".into())?;
    let unknown = dir.path().join("u.txt");
    std::fs::write(&unknown, "[dims] K=8 N=8 R=3 l=2\n[column] b_n = x2*x1^n\n[scaling_invariant] unknown\n")
        .map_err(|e| e.to_string())?;
    let cases: Vec<Vec<&str>> = vec![
        vec!["certify", model_s, "--format", "json"],
        vec!["certify", unknown.to_str().unwrap(), "--format", "json", "--seed", "42"],
        vec!["verify", model_s, "--format", "json"],
        vec!["sobi-table", "--format", "json"],
        vec!["trig-check", "12", "--format", "json"],
    ];
    for args in &cases {
        let a = run(args)?;
        let b = run(args)?;
        ensure(!a.is_empty() && a == b, || format!("{} differs between runs", args.join(" ")))?;
    }
    Ok(format!("{} commands byte-identical across two runs", cases.len()))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("SOBI bound table reproduction", table_reproduction),
        ("SOBI certification I=3..5, P=40", sobi_certification),
        ("exponential-polynomial bound", exp_poly_bound),
        ("rational bound and null vector", rational_bound),
        ("worked example bound and direct form", worked_example),
        ("multiple-angle identities", trig_identities),
        ("reformulation identities", reformulation_identities),
        ("empirical uniqueness", empirical_uniqueness),
        ("AD validation", ad_validation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    let mut out = std::io::stdout().lock();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let line = match &result {
            Ok(detail) => format!("PASS criterion {:>2}: {name} [{secs:.2} s] {detail}", k + 1),
            Err(why) => {
                failed += 1;
                format!("FAIL criterion {:>2}: {name} [{secs:.2} s] {why}", k + 1)
            }
        };
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
