//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tbcurv::basemanifold::{ChartManifold, PolyTerm};
use tbcurv::bundlemetric::BundlePoint;
use tbcurv::closedform::{self, ComponentClass, ExpSign};
use tbcurv::metricfamily::{flatness_beta, FamilyPreset, FiberArg, NaturalMetricFamily};
use tbcurv::oracle::{self, ComparisonRun, OracleConfig};
use tbcurv::scalarfun::ScalarFunction;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn presets() -> Vec<NaturalMetricFamily> {
    [
        FamilyPreset::Sasaki,
        FamilyPreset::CheegerGromoll,
        FamilyPreset::ExpPlus,
        FamilyPreset::ExpMinus,
    ]
    .into_iter()
    .map(|p| p.build().unwrap())
    .collect()
}

/// Points at base `x` with `|v|` in `speeds`, along a fixed generic direction.
fn points(m: &ChartManifold, bases: &[Vec<f64>], speeds: &[f64]) -> Vec<BundlePoint> {
    let mut out = Vec::new();
    for x in bases {
        let d: Vec<f64> = (0..x.len()).map(|i| 1.0 - 0.4 * i as f64).collect();
        let len = m.norm_sq(x, &d).unwrap().sqrt();
        for &s in speeds {
            out.push(BundlePoint::new(
                x.clone(),
                d.iter().map(|c| c * s / len).collect(),
            ));
        }
    }
    out
}

fn first_failure(run: &ComparisonRun) -> String {
    run.reports
        .iter()
        .find(|r| !r.pass)
        .map(|r| r.summary())
        .unwrap_or_default()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cfg = OracleConfig::default();
    let speeds = [0.0, 0.5, 1.5];
    let cases: Vec<(ChartManifold, Vec<Vec<f64>>)> = vec![
        (
            ChartManifold::sphere(2, 1.0),
            vec![vec![0.2, -0.1], vec![0.6, 0.3]],
        ),
        (
            ChartManifold::sphere(3, 1.0),
            vec![vec![0.1, 0.2, -0.3], vec![-0.4, 0.1, 0.2]],
        ),
        (
            ChartManifold::hyperbolic(2),
            vec![vec![0.1, 0.2], vec![-0.3, 0.25]],
        ),
        (
            ChartManifold::euclidean(3),
            vec![vec![0.0, 0.0, 0.0], vec![1.0, -2.0, 0.5]],
        ),
    ];
    let mut signs = Vec::new();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (m, bases) in &cases {
        let pts = points(m, bases, &speeds);
        for fam in presets() {
            let run = oracle::compare(m, &fam, &pts, &cfg).map_err(|e| e.to_string())?;
            ensure(run.pass, || {
                format!("{} {}: {}", m.id, fam.name, first_failure(&run))
            })?;
            ensure(run.calibration.mixed.is_empty(), || {
                format!(
                    "{} {}: classes with the other sign {:?}",
                    m.id, fam.name, run.calibration.mixed
                )
            })?;
            if !run.calibration.underdetermined {
                signs.push(run.calibration.sign);
            }
            worst = run.reports.iter().fold(worst, |w, r| w.max(r.max_abs_dev));
            count += run.reports.len();
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(signs.windows(2).all(|w| w[0] == w[1]), || {
        format!("signs differ between runs: {signs:?}")
    })?;
    ensure(elapsed < 60.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!(
        "{count} points, sign {:+}, max |closed - oracle| = {worst:.2e}, {elapsed:.1} s",
        signs.first().copied().unwrap_or(1)
    ))
}

fn conformal_r3() -> ChartManifold {
    ChartManifold::conformal(
        3,
        vec![PolyTerm {
            coef: 0.1,
            powers: vec![1, 1, 0],
        }],
    )
}

fn criterion_2() -> Outcome {
    let m = conformal_r3();
    let bases = [
        vec![0.3, -0.2, 0.1],
        vec![1.0, 0.5, -0.4],
        vec![-0.7, 0.8, 0.2],
    ];
    let pts: Vec<BundlePoint> = bases
        .iter()
        .flat_map(|x| points(&m, std::slice::from_ref(x), &[1.0]))
        .collect();
    let mut detail = Vec::new();
    for fam in [
        FamilyPreset::Sasaki.build().unwrap(),
        FamilyPreset::ExpPlus.build().unwrap(),
    ] {
        let run =
            oracle::compare(&m, &fam, &pts, &OracleConfig::default()).map_err(|e| e.to_string())?;
        ensure(run.pass, || {
            format!("{}: {}", fam.name, first_failure(&run))
        })?;
        let mut hhvh: f64 = 0.0;
        for r in &run.reports {
            let c = r
                .classes
                .iter()
                .find(|c| c.class == ComponentClass::Hhvh)
                .unwrap();
            ensure(c.pass, || format!("{}: HHVH class fails", fam.name))?;
            hhvh = hhvh.max(c.max_abs_closed);
        }
        ensure(hhvh > 1e-4, || {
            format!("{}: max |HHVH| = {hhvh:.3e}", fam.name)
        })?;
        detail.push(format!("{} max |HHVH| = {hhvh:.3e}", fam.name));
    }
    Ok(detail.join(", "))
}

fn criterion_3() -> Outcome {
    let m = ChartManifold::euclidean(3);
    let pts = points(&m, &[vec![0.3, -0.1, 0.7]], &[0.0, 0.5, 1.5]);
    let alpha = ScalarFunction::parse("exp(t)").unwrap();
    let flat_fams = [
        FamilyPreset::Sasaki.build().unwrap(),
        NaturalMetricFamily::new(
            "exp(t) with flatness beta",
            alpha.clone(),
            flatness_beta(&alpha),
        ),
    ];
    let mut detail = Vec::new();
    for fam in &flat_fams {
        let run =
            oracle::compare(&m, fam, &pts, &OracleConfig::default()).map_err(|e| e.to_string())?;
        let mut mc: f64 = 0.0;
        let mut mo: f64 = 0.0;
        for r in &run.reports {
            ensure(r.error.is_none(), || r.summary())?;
            mc = r.closed.iter().fold(mc, |a, x| a.max(x.abs()));
            mo = r.oracle.iter().fold(mo, |a, x| a.max(x.abs()));
        }
        ensure(mc <= 1e-9 && mo <= 1e-6, || {
            format!("{}: closed {mc:.2e}, oracle {mo:.2e}", fam.name)
        })?;
        detail.push(format!("{}: closed {mc:.1e} oracle {mo:.1e}", fam.name));
    }
    let cg = FamilyPreset::CheegerGromoll.build().unwrap();
    let fp = m.adapted_frame(&[0.3, -0.1, 0.7], &[0.0; 3]).unwrap();
    let table = closedform::tm_curvature(&m, &cg, &fp).map_err(|e| e.to_string())?;
    let n = 3;
    let mut vmax: f64 = 0.0;
    for a in n..2 * n {
        for b in n..2 * n {
            for c in n..2 * n {
                for d in n..2 * n {
                    vmax = vmax.max(table.get(a, b, c, d).abs());
                }
            }
        }
    }
    ensure(vmax >= 1.0, || {
        format!("cheeger-gromoll max vertical component {vmax}")
    })?;
    detail.push(format!(
        "cheeger-gromoll at t=0: max vertical component {vmax}"
    ));
    Ok(detail.join("; "))
}

/// A positive expression in `t` built from a few templates.
fn random_alpha(rng: &mut ChaCha8Rng) -> String {
    let term = |rng: &mut ChaCha8Rng| -> String {
        let a = rng.gen_range(0.5..2.0);
        let b = rng.gen_range(0.0..1.0);
        let c = rng.gen_range(-0.15..0.4);
        match rng.gen_range(0..7) {
            0 => format!("{a:.3}*exp({c:.3}*t)"),
            1 => format!("{a:.3}+{b:.3}*t"),
            2 => format!("{a:.3}+{b:.3}*t^2"),
            3 => format!(
                "({a:.3}+t)^({}/{})",
                rng.gen_range(1..4),
                rng.gen_range(1..4)
            ),
            4 => format!("{a:.3}/(1+{b:.3}*t)"),
            5 => format!("sqrt({a:.3}+{b:.3}*t)"),
            _ => format!("{a:.3}+{b:.3}*ln(1+t)"),
        }
    };
    if rng.gen_bool(0.4) {
        let x = term(rng);
        let y = term(rng);
        format!("{x} + {y}")
    } else {
        term(rng)
    }
}

fn criterion_4() -> Outcome {
    const T_MAX: f64 = 10.0;
    const SAMPLES: usize = 2001;
    let sasaki = FamilyPreset::Sasaki.build().unwrap().with_t_max(T_MAX);
    for k in 0..SAMPLES {
        let s = T_MAX * k as f64 / (SAMPLES - 1) as f64;
        let j = sasaki.jets(FiberArg::from_sq(s)).unwrap();
        ensure(j.f() == 0.0 && j.h() == 0.0, || {
            format!("sasaki F, H at {s}: {} {}", j.f(), j.h())
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x7462_6375_7276);
    let mut accepted = 0;
    let mut rejected = 0;
    let mut worst = (0.0f64, 0.0f64);
    let mut converse_min_h = f64::INFINITY;
    while accepted < 50 {
        let src = random_alpha(&mut rng);
        let alpha = ScalarFunction::parse(&src).map_err(|e| format!("{src}: {e}"))?;
        let fam = NaturalMetricFamily::new(src.clone(), alpha.clone(), flatness_beta(&alpha))
            .with_t_max(T_MAX);
        let report = fam.validate(SAMPLES).map_err(|e| e.to_string())?;
        if !report.is_valid() || report.phi_violation.is_some() {
            rejected += 1;
            continue;
        }
        accepted += 1;
        let (mf, mh) = fam.max_abs_f_h(SAMPLES).map_err(|e| e.to_string())?;
        ensure(mf <= 1e-10 && mh <= 1e-8, || {
            format!("alpha = {src}: max|F| = {mf:.3e}, max|H| = {mh:.3e}")
        })?;
        worst = (worst.0.max(mf), worst.1.max(mh));
        // converse: moving beta off the flatness choice makes F nonzero, and
        // H must then be nonzero too
        let beta = flatness_beta(&alpha);
        let beta_plus = ScalarFunction::from_derivatives("flatness beta + 0.5", 1, move |t| {
            match beta.taylor(t, 1) {
                Ok(b) => vec![b.derivative(0) + 0.5, b.derivative(1)],
                Err(_) => vec![f64::NAN; 2],
            }
        });
        let off = NaturalMetricFamily::new("shifted", alpha, beta_plus).with_t_max(T_MAX);
        if off.validate(SAMPLES).map_err(|e| e.to_string())?.is_valid() {
            let (mf2, mh2) = off.max_abs_f_h(SAMPLES).map_err(|e| e.to_string())?;
            ensure(mf2 > 1e-10 && mh2 > 1e-8, || {
                format!("alpha = {src}: shifted beta gives F {mf2:.3e}, H {mh2:.3e}")
            })?;
            converse_min_h = converse_min_h.min(mh2);
        }
    }
    Ok(format!(
        "sasaki exact zeros; 50 random alpha ({rejected} rejected as invalid): max|F| = {:.2e}, max|H| = {:.2e}; off-flatness min max|H| = {converse_min_h:.2e}",
        worst.0, worst.1
    ))
}

fn criterion_5() -> Outcome {
    let cases = [
        (ChartManifold::sphere(2, 1.0), vec![0.2, -0.1]),
        (ChartManifold::sphere(3, 1.0), vec![0.1, 0.2, -0.3]),
        (ChartManifold::hyperbolic(2), vec![0.1, 0.2]),
        (conformal_r3(), vec![0.3, -0.2, 0.1]),
        (ChartManifold::euclidean(3), vec![0.0, 0.0, 0.0]),
    ];
    let mut min_hv = f64::INFINITY;
    let mut t0_dev: f64 = 0.0;
    let mut count = 0;
    for (m, x) in &cases {
        for fam in presets() {
            for bp in points(m, std::slice::from_ref(x), &[0.0, 0.25, 0.5, 1.0, 1.5, 2.0]) {
                let fp = m.adapted_frame(&bp.x, &bp.v).map_err(|e| e.to_string())?;
                let tabs = closedform::tm_sectional(m, &fam, &fp).map_err(|e| e.to_string())?;
                count += 1;
                for (i, row) in tabs.hv.iter().enumerate() {
                    ensure(row[0] == 0.0, || {
                        format!(
                            "{} {}: K(e_{}, e_(n+1)) = {}",
                            m.id,
                            fam.name,
                            i + 1,
                            row[0]
                        )
                    })?;
                    min_hv = row.iter().fold(min_hv, |a, x| a.min(*x));
                }
                ensure(min_hv >= -1e-12, || {
                    format!("{} {}: mixed sectional {min_hv}", m.id, fam.name)
                })?;
                if fp.t == 0.0 {
                    let base = m.base_invariants(&fp).map_err(|e| e.to_string())?;
                    for (r1, r2) in tabs.hh.iter().zip(&base.sectional) {
                        for (a, b) in r1.iter().zip(r2) {
                            t0_dev = t0_dev.max((a - b).abs());
                        }
                    }
                    ensure(t0_dev <= 1e-10, || {
                        format!("{} {}: t=0 horizontal vs base {t0_dev:.3e}", m.id, fam.name)
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "{count} points: min mixed sectional {min_hv:.3e}, K(e_i, e_(n+1)) exactly 0, t=0 horizontal vs base {t0_dev:.1e}"
    ))
}

/// Closed-form scalar curvature on flat `R^n` at `|v|^2 = s`.
fn flat_scalar(n: usize, fam: &NaturalMetricFamily, s: f64) -> Result<f64, String> {
    let m = ChartManifold::euclidean(n);
    let mut v = vec![0.0; n];
    v[0] = s.sqrt();
    let fp = m
        .adapted_frame(&vec![0.0; n], &v)
        .map_err(|e| e.to_string())?;
    closedform::tm_scalar(&m, fam, &fp).map_err(|e| e.to_string())
}

fn criterion_6() -> Outcome {
    let plus = FamilyPreset::ExpPlus.build().unwrap();
    let minus = FamilyPreset::ExpMinus.build().unwrap();
    let mut worst: f64 = 0.0;
    for n in [2, 3] {
        for s in [0.0, 1.0, 4.0, 6.0] {
            for (fam, sign) in [(&plus, ExpSign::Plus), (&minus, ExpSign::Minus)] {
                let general = flat_scalar(n, fam, s)?;
                let remark = closedform::scalar_exp_remark(0.0, 0.0, n, FiberArg::from_sq(s), sign);
                let special = closedform::scalar_exp_specials(0.0, n, FiberArg::from_sq(s), sign);
                let dev = (general - remark).abs().max((general - special).abs());
                ensure(dev <= 1e-9, || {
                    format!(
                        "n={n} s={s} {}: general {general} remark {remark}",
                        fam.name
                    )
                })?;
                worst = worst.max(dev);
            }
        }
    }
    let th = closedform::exp_minus_zero_threshold(3).unwrap();
    ensure((th - (2.0 + 13f64.sqrt())).abs() < 1e-15, || {
        format!("threshold {th}")
    })?;
    let f = |s: f64| flat_scalar(3, &minus, s);
    let (mut lo, mut hi) = (th - 0.05, th + 0.05);
    ensure(f(lo)? > 0.0 && f(hi)? < 0.0, || {
        "sign change not bracketed".into()
    })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let residual = f(th)?.abs();
    ensure((root - th).abs() <= 1e-9 && residual <= 1e-9, || {
        format!("root {root} vs {th}, |S(threshold)| = {residual:.3e}")
    })?;
    let mut max_plus = f64::NEG_INFINITY;
    for n in [2, 3, 4] {
        for k in 0..=80 {
            let s = 0.125 * k as f64;
            max_plus = max_plus.max(flat_scalar(n, &plus, s)?);
        }
    }
    ensure(max_plus < 0.0, || {
        format!("exp+ scalar curvature reaches {max_plus}")
    })?;
    Ok(format!(
        "general vs exponential formulas {worst:.1e}; exp- root {root:.12} (|S| there {residual:.1e}); max exp+ scalar {max_plus:.3e}"
    ))
}

fn criterion_7() -> Outcome {
    let m = ChartManifold::sphere(2, 1.0);
    let cfg = OracleConfig::default();
    let mut detail = Vec::new();
    for fam in presets() {
        let pts = points(&m, &[vec![0.2, -0.1], vec![0.5, 0.4]], &[0.5, 1.5]);
        let run = oracle::compare(&m, &fam, &pts, &cfg).map_err(|e| e.to_string())?;
        ensure(run.pass, || first_failure(&run))?;
        for (r, bp) in run.reports.iter().zip(&pts) {
            let inv = r.invariants.as_ref().ok_or("missing invariants")?;
            let fp = m.adapted_frame(&bp.x, &bp.v).map_err(|e| e.to_string())?;
            let general = closedform::tm_sectional(&m, &fam, &fp).map_err(|e| e.to_string())?;
            let constcurv = closedform::tm_sectional_constcurv(1.0, &fam, fp.t, 2)
                .map_err(|e| e.to_string())?;
            let legacy = closedform::constcurv_mixed_legacy(1.0, &fam, fp.t, 2)
                .map_err(|e| e.to_string())?;
            for i in 0..2 {
                for j in 0..2 {
                    let o = inv.sectional_oracle.hv[i][j];
                    let g = general.hv[i][j];
                    ensure(cfg.tolerance.accepts(g, o), || {
                        format!("{}: general mixed K[{i}][{j}] {g} vs oracle {o}", fam.name)
                    })?;
                    ensure(cfg.tolerance.accepts(constcurv.hv[i][j], o), || {
                        format!("{}: substituted mixed K[{i}][{j}] vs oracle", fam.name)
                    })?;
                    let agrees = cfg.tolerance.accepts(legacy[i][j], o);
                    let expected = !(i == 0 && j == 0);
                    ensure(agrees == expected, || {
                        format!(
                            "{}: legacy mixed K[{i}][{j}] = {} vs oracle {o}",
                            fam.name, legacy[i][j]
                        )
                    })?;
                }
            }
            ensure(
                r.discrepancies
                    .iter()
                    .any(|e| e.code == "constcurv-mixed-sectional"),
                || format!("{}: discrepancy not flagged", fam.name),
            )?;
        }
        detail.push(fam.name.clone());
    }
    Ok(format!(
        "general mixed sectional matches the oracle ({}); legacy constant-curvature form off at i=j=1 only, flagged in every report",
        detail.join(", ")
    ))
}

fn criterion_8() -> Outcome {
    let sasaki = FamilyPreset::Sasaki.build().unwrap();
    let flat = ChartManifold::euclidean(3);
    let mut flat_max: f64 = 0.0;
    for bp in points(&flat, &[vec![0.3, -0.1, 0.7]], &[0.0, 0.5, 1.5]) {
        let fp = flat
            .adapted_frame(&bp.x, &bp.v)
            .map_err(|e| e.to_string())?;
        let ric = closedform::tm_ricci(&flat, &sasaki, &fp).map_err(|e| e.to_string())?;
        flat_max = flat_max.max(ric.max_abs());
    }
    ensure(flat_max <= 1e-9, || format!("flat Ricci {flat_max:.3e}"))?;
    let s2 = ChartManifold::sphere(2, 1.0);
    let pts = points(&s2, &[vec![0.2, -0.1], vec![0.5, 0.4]], &[0.0, 0.5, 1.5]);
    let run =
        oracle::compare(&s2, &sasaki, &pts, &OracleConfig::default()).map_err(|e| e.to_string())?;
    let mut dev: f64 = 0.0;
    for r in &run.reports {
        let inv = r.invariants.as_ref().ok_or_else(|| r.summary())?;
        dev = dev.max(inv.ricci_closed.max_abs_diff(&inv.ricci_oracle));
    }
    ensure(dev <= 1e-4, || {
        format!("S^2 Ricci vs oracle trace {dev:.3e}")
    })?;
    Ok(format!(
        "flat max |Ric| {flat_max:.1e}; S^2 closed vs oracle trace {dev:.2e}"
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("verify.json");
    std::fs::write(
        &cfg,
        r#"{
  "manifold": "sphere:3",
  "family": "exp-",
  "tasks": ["verify"],
  "points": {"grid": {"base": [[0.1, 0.2, -0.3], [0.4, -0.2, 0.1]], "speeds": [0, 0.5, 1.5],
                      "directions": [[1, 0.5, 0.2], [0, 1, -1]]}},
  "output": {"format": "json"}
}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("report{k}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_tbcurv"))
            .args([
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || {
            format!("verify run {k} exited with {status}")
        })?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "reports differ".into())?;
    Ok(format!("two runs, {} identical bytes", outputs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence over the test grid", criterion_1),
        (
            "covariant-derivative term on a conformal metric",
            criterion_2,
        ),
        ("flatness", criterion_3),
        ("F/H function suite", criterion_4),
        ("sectional properties", criterion_5),
        ("scalar curvature of the exponential metrics", criterion_6),
        ("constant-curvature mixed sectional", criterion_7),
        ("Ricci tensor", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {detail}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
