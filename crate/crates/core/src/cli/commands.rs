//! The individual tasks. Each returns its output in both formats plus an
//! exit status; assembly into one document happens in the caller.

use serde::Serialize;
use serde_json::{json, Value};

use crate::basemanifold::ChartManifold;
use crate::bundlemetric::BundlePoint;
use crate::closedform::{self, ExpSign};
use crate::error::{Error, Result};
use crate::metricfamily::{FamilyPreset, FiberArg, NaturalMetricFamily};
use crate::oracle;

use super::config::RunConfig;

/// Max `|F|` that counts as `F = 0`.
pub const F_ZERO: f64 = 1e-10;
/// Max `|H|` that counts as `H = 0`.
pub const H_ZERO: f64 = 1e-8;
/// Relative agreement required between the general and specialized scalar
/// curvature in `scan`.
pub const SCAN_AGREEMENT: f64 = 1e-9;

pub const T_NOTE: &str =
    "# column t is |v|; alpha, beta, F, H take s = |v|^2 (the variable `t` inside alpha/beta expressions is s)";
pub const INDEX_NOTE: &str = "# frame indices 1..n are horizontal lifts e_i, n+1..2n are vertical lifts e_{n+i}; u_1 = v/|v|";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    Failure = 1,
    Config = 2,
}

pub struct TaskOutput {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
    pub status: Status,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_owned()
    } else {
        format!("{x}")
    }
}

fn vec_field(x: &[f64]) -> String {
    x.iter().map(|c| num(*c)).collect::<Vec<_>>().join(";")
}

fn strings<const N: usize>(h: [&str; N]) -> Vec<String> {
    h.iter().map(|s| s.to_string()).collect()
}

fn point_cells(k: usize, p: &BundlePoint, t: Option<f64>) -> Vec<String> {
    vec![
        k.to_string(),
        vec_field(&p.x),
        vec_field(&p.v),
        t.map(num).unwrap_or_default(),
    ]
}

// family-check

#[derive(Serialize)]
struct FhSample {
    s: f64,
    alpha: Option<f64>,
    beta: Option<f64>,
    f: Option<f64>,
    h: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct PropertyVerdict {
    name: &'static str,
    applies: bool,
    holds: Option<bool>,
    detail: String,
}

const SAMPLE_ARGS: [f64; 8] = [0.0, 0.5, 1.0, 2.0, 4.0, 6.0, 10.0, 25.0];

pub fn family_check(cfg: &RunConfig) -> Result<TaskOutput> {
    let fam = cfg.family()?;
    let report = fam.validate(cfg.validation.samples)?;
    let samples: Vec<FhSample> = SAMPLE_ARGS
        .iter()
        .copied()
        .filter(|s| *s <= fam.t_max)
        .map(|s| match fam.jets(FiberArg::from_sq(s)) {
            Ok(j) => FhSample {
                s,
                alpha: Some(j.alpha),
                beta: Some(j.beta),
                f: Some(j.f()),
                h: Some(j.h()),
                error: None,
            },
            Err(e) => FhSample {
                s,
                alpha: None,
                beta: None,
                f: None,
                h: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut verdicts = Vec::new();
    let mut maxima = None;
    if report.is_valid() {
        let (mf, mh) = fam.max_abs_f_h(cfg.validation.samples)?;
        maxima = Some((mf, mh));
        let phi_ok = report.phi_violation.is_none();
        let f_zero = mf <= F_ZERO;
        let identity = if f_zero {
            identity_residual(&fam, cfg.validation.samples)?
        } else {
            f64::NAN
        };
        verdicts.push(PropertyVerdict {
            name: "F=0 implies H=0 and alpha*(alpha+t*beta)=(alpha+t*alpha')^2",
            applies: f_zero && phi_ok,
            holds: (f_zero && phi_ok).then_some(mh <= H_ZERO && identity <= 1e-10),
            detail: format!(
                "max|F|={} max|H|={} identity residual={}",
                num(mf),
                num(mh),
                num(identity)
            ),
        });
        let h_zero = mh <= H_ZERO;
        verdicts.push(PropertyVerdict {
            name: "H=0 implies F=0",
            applies: h_zero,
            holds: h_zero.then_some(f_zero),
            detail: format!("max|H|={} max|F|={}", num(mh), num(mf)),
        });
    }
    let status = if !report.is_valid() {
        Status::Config
    } else if verdicts.iter().any(|v| v.holds == Some(false)) {
        Status::Failure
    } else {
        Status::Ok
    };

    let verdict_line = match report.violation {
        None => "valid".to_string(),
        Some(v) => format!("invalid at s = {} ({:?})", num(v.t), v.kind),
    };
    let mut comments = vec![
        T_NOTE.to_string(),
        format!("# family: {}", fam.name),
        format!("# alpha = {}, beta = {}", fam.alpha, fam.beta),
        format!(
            "# validity on [0, {}] with {} samples: {verdict_line}",
            num(fam.t_max),
            report.samples
        ),
    ];
    if let Some(p) = report.phi_violation {
        comments.push(format!("# alpha + s*alpha' <= 0 first at s = {}", num(p.t)));
    }
    if let Some((mf, mh)) = maxima {
        comments.push(format!("# max|F| = {}, max|H| = {}", num(mf), num(mh)));
    }
    for v in &verdicts {
        let state = match v.holds {
            None => "not applicable",
            Some(true) => "holds",
            Some(false) => "FAILS",
        };
        comments.push(format!("# {}: {state} ({})", v.name, v.detail));
    }
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let rows = samples
        .iter()
        .map(|s| {
            vec![
                num(s.s),
                opt(s.alpha),
                opt(s.beta),
                opt(s.f),
                opt(s.h),
                s.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let json = json!({
        "family": fam.name,
        "alpha": fam.alpha.to_string(),
        "beta": fam.beta.to_string(),
        "validation": report,
        "valid": report.is_valid(),
        "max_abs_f": maxima.map(|m| m.0),
        "max_abs_h": maxima.map(|m| m.1),
        "samples": samples,
        "properties": verdicts,
    });
    Ok(TaskOutput {
        comments,
        header: strings(["s", "alpha", "beta", "F", "H", "error"]),
        rows,
        json,
        status,
    })
}

fn identity_residual(fam: &NaturalMetricFamily, samples: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..samples {
        let s = fam.t_max * k as f64 / (samples - 1) as f64;
        let j = fam.jets(FiberArg::from_sq(s))?;
        let phi2 = j.phi() * j.phi();
        worst = worst.max((j.alpha * j.delta() - phi2).abs() / phi2.max(1.0));
    }
    Ok(worst)
}

// point tasks

/// Family restricted to its validated range; an invalid family is a
/// configuration error.
fn checked_family(cfg: &RunConfig) -> Result<NaturalMetricFamily> {
    let fam = cfg.family()?;
    let report = fam.validate(cfg.validation.samples)?;
    if let Some(v) = report.violation {
        return Err(Error::Config(format!(
            "family `{}` is invalid at s = {} ({:?}); lower t_max below it",
            fam.name,
            num(v.t),
            v.kind
        )));
    }
    Ok(fam)
}

struct PointSetup {
    m: ChartManifold,
    fam: NaturalMetricFamily,
    points: Vec<BundlePoint>,
}

fn setup(cfg: &RunConfig) -> Result<PointSetup> {
    let m = cfg.manifold()?;
    let fam = checked_family(cfg)?;
    let points = cfg.points.expand(&m)?;
    if points.is_empty() {
        return Err(Error::Config("no points given".into()));
    }
    Ok(PointSetup { m, fam, points })
}

fn preamble(s: &PointSetup) -> Vec<String> {
    vec![
        T_NOTE.to_string(),
        format!("# manifold: {}", s.m.id),
        format!(
            "# family: {} (alpha = {}, beta = {})",
            s.fam.name, s.fam.alpha, s.fam.beta
        ),
    ]
}

fn point_json(p: &BundlePoint, t: Option<f64>, error: Option<String>, body: Value) -> Value {
    json!({ "x": p.x, "v": p.v, "t": t, "error": error, "result": body })
}

fn error_row(k: usize, p: &BundlePoint, width: usize, e: &Error) -> Vec<String> {
    let mut row = point_cells(k, p, None);
    row.resize(width - 1, String::new());
    row.push(e.to_string());
    row
}

/// Runs `f` at every point; per-point errors become rows and fail the task.
fn per_point<F>(s: &PointSetup, header: Vec<String>, extra: Vec<String>, f: F) -> TaskOutput
where
    F: Fn(&BundlePoint) -> Result<(f64, Vec<Vec<String>>, Value)>,
{
    let mut rows = Vec::new();
    let mut items = Vec::new();
    let mut status = Status::Ok;
    for (k, p) in s.points.iter().enumerate() {
        match f(p) {
            Ok((t, body_rows, body)) => {
                for r in body_rows {
                    let mut row = point_cells(k, p, Some(t));
                    row.extend(r);
                    row.push(String::new());
                    rows.push(row);
                }
                items.push(point_json(p, Some(t), None, body));
            }
            Err(e) => {
                status = Status::Failure;
                rows.push(error_row(k, p, header.len(), &e));
                items.push(point_json(p, None, Some(e.to_string()), Value::Null));
            }
        }
    }
    let mut comments = preamble(s);
    comments.extend(extra);
    TaskOutput {
        comments,
        header,
        rows,
        json: json!({ "manifold": s.m.id, "family": s.fam.name, "points": items }),
        status,
    }
}

fn with_point_columns<const N: usize>(cols: [&str; N]) -> Vec<String> {
    let mut h = strings(["point", "x", "v", "t"]);
    h.extend(strings(cols));
    h.push("error".into());
    h
}

pub fn curvature(cfg: &RunConfig) -> Result<TaskOutput> {
    let s = setup(cfg)?;
    let header = with_point_columns(["a", "b", "c", "d", "class", "value"]);
    Ok(per_point(&s, header, vec![INDEX_NOTE.to_string()], |p| {
        let fp = s.m.adapted_frame(&p.x, &p.v)?;
        let table = closedform::tm_curvature(&s.m, &s.fam, &fp)?;
        let m = 2 * table.n;
        let mut rows = Vec::with_capacity(m.pow(4));
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        rows.push(vec![
                            (a + 1).to_string(),
                            (b + 1).to_string(),
                            (c + 1).to_string(),
                            (d + 1).to_string(),
                            table.class_of(a, b, c, d).label().to_string(),
                            num(table.get(a, b, c, d)),
                        ]);
                    }
                }
            }
        }
        let body = json!({ "n": table.n, "frame": fp.u, "table": table.data.as_slice() });
        Ok((fp.t, rows, body))
    }))
}

pub fn sectional(cfg: &RunConfig) -> Result<TaskOutput> {
    let s = setup(cfg)?;
    let header = with_point_columns(["block", "i", "j", "value"]);
    let note = "# block hh: K(e_i,e_j); vv: K(e_{n+i},e_{n+j}); hv: K(e_i,e_{n+j}); diagonal of hh and vv is not a plane and is 0".to_string();
    Ok(per_point(&s, header, vec![note], |p| {
        let fp = s.m.adapted_frame(&p.x, &p.v)?;
        let tabs = closedform::tm_sectional(&s.m, &s.fam, &fp)?;
        let mut rows = Vec::new();
        for (name, block) in [("hh", &tabs.hh), ("vv", &tabs.vv), ("hv", &tabs.hv)] {
            for (i, r) in block.iter().enumerate() {
                for (j, x) in r.iter().enumerate() {
                    rows.push(vec![
                        name.to_string(),
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        num(*x),
                    ]);
                }
            }
        }
        Ok((
            fp.t,
            rows,
            serde_json::to_value(&tabs).unwrap_or(Value::Null),
        ))
    }))
}

pub fn ricci(cfg: &RunConfig) -> Result<TaskOutput> {
    let s = setup(cfg)?;
    let header = with_point_columns(["a", "b", "value"]);
    let note = "# Ric(e_a, e_b) on the unnormalized adapted frame".to_string();
    Ok(per_point(
        &s,
        header,
        vec![INDEX_NOTE.to_string(), note],
        |p| {
            let fp = s.m.adapted_frame(&p.x, &p.v)?;
            let ric = closedform::tm_ricci(&s.m, &s.fam, &fp)?;
            let mut rows = Vec::new();
            for (a, r) in ric.rows.iter().enumerate() {
                for (b, x) in r.iter().enumerate() {
                    rows.push(vec![(a + 1).to_string(), (b + 1).to_string(), num(*x)]);
                }
            }
            Ok((
                fp.t,
                rows,
                serde_json::to_value(&ric).unwrap_or(Value::Null),
            ))
        },
    ))
}

pub fn scalar(cfg: &RunConfig) -> Result<TaskOutput> {
    let s = setup(cfg)?;
    let header = with_point_columns(["scalar"]);
    Ok(per_point(&s, header, vec![], |p| {
        let fp = s.m.adapted_frame(&p.x, &p.v)?;
        let sc = closedform::tm_scalar(&s.m, &s.fam, &fp)?;
        Ok((fp.t, vec![vec![num(sc)]], json!({ "scalar": sc })))
    }))
}

pub fn verify(cfg: &RunConfig) -> Result<TaskOutput> {
    let s = setup(cfg)?;
    let run = oracle::compare(&s.m, &s.fam, &s.points, &cfg.oracle)?;
    let mut comments = preamble(&s);
    comments.push(format!(
        "# oracle: {:?}, tolerance abs {} rel {}",
        cfg.oracle.step,
        num(cfg.oracle.tolerance.abs),
        num(cfg.oracle.tolerance.rel)
    ));
    comments.push(format!(
        "# calibrated sign: {:+}{}{}",
        run.calibration.sign,
        if run.calibration.underdetermined {
            " (underdetermined)"
        } else {
            ""
        },
        if run.calibration.mixed.is_empty() {
            String::new()
        } else {
            format!(
                "; classes preferring the other sign: {}",
                run.calibration
                    .mixed
                    .iter()
                    .map(|c| c.label())
                    .collect::<Vec<_>>()
                    .join(" ")
            )
        }
    ));
    let header = with_point_columns([
        "max_abs_dev",
        "max_rel_dev",
        "failing_classes",
        "discrepancies",
        "warnings",
        "pass",
    ]);
    let rows = run
        .reports
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let p = BundlePoint::new(r.provenance.x.clone(), r.provenance.v.clone());
            if let Some(e) = &r.error {
                let mut row = point_cells(k, &p, None);
                row.resize(header.len() - 2, String::new());
                row.push("false".into());
                row.push(e.clone());
                return row;
            }
            let mut row = point_cells(k, &p, Some(r.t));
            let failing: Vec<&str> = r
                .classes
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.class.label())
                .collect();
            let discrepancies: Vec<&str> =
                r.discrepancies.iter().map(|e| e.code.as_str()).collect();
            row.extend([
                num(r.max_abs_dev),
                num(r.max_rel_dev),
                failing.join(" "),
                discrepancies.join(" "),
                r.warnings.join(" | "),
                r.pass.to_string(),
                String::new(),
            ]);
            row
        })
        .collect();
    let status = if run.pass {
        Status::Ok
    } else {
        Status::Failure
    };
    Ok(TaskOutput {
        comments,
        header,
        rows,
        json: serde_json::to_value(&run).map_err(|e| Error::Config(e.to_string()))?,
        status,
    })
}

// scan

fn exp_sign(p: &FamilyPreset) -> Option<ExpSign> {
    match p {
        FamilyPreset::ExpPlus => Some(ExpSign::Plus),
        FamilyPreset::ExpMinus => Some(ExpSign::Minus),
        _ => None,
    }
}

/// Scalar curvature from the exponential-metric formulas, when they apply.
fn specialized_scalar(
    m: &ChartManifold,
    sign: ExpSign,
    fp: &crate::basemanifold::AdaptedFramePoint,
) -> Result<f64> {
    let n = m.dim();
    let s = FiberArg::from_norm(fp.t);
    if let Some(k0) = m.constant_curvature() {
        return Ok(closedform::scalar_exp_specials(k0, n, s, sign));
    }
    let fc = m.frame_curvature(fp, false)?;
    // sum_{i,j} |R(u_i,u_j)v|^2 = t^2 sum_{i,j,m} R_{ij0m}^2
    let mut rv = 0.0;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                rv += fc.r.at4(i, j, 0, l).powi(2);
            }
        }
    }
    Ok(closedform::scalar_exp_remark(
        fc.invariants().scalar,
        fp.t * fp.t * rv,
        n,
        s,
        sign,
    ))
}

pub fn scan(cfg: &RunConfig) -> Result<TaskOutput> {
    let s = setup(cfg)?;
    let sign = cfg.family.as_ref().and_then(exp_sign);
    let header = with_point_columns([
        "s",
        "scalar_general",
        "scalar_specialized",
        "F",
        "H",
        "status",
    ]);
    let mut comments = vec![
        "# scalar_specialized: exponential-metric formula (constant-curvature form when the base has constant curvature); empty if not applicable".to_string(),
        format!("# status: ok, or mismatch when the two scalar columns differ by more than {} relative", num(SCAN_AGREEMENT)),
    ];
    if let (Some(ExpSign::Minus), Some(k0)) = (sign, s.m.constant_curvature()) {
        if k0 == 0.0 {
            if let Some(th) = closedform::exp_minus_zero_threshold(s.m.dim()) {
                comments.push(format!(
                    "# predicted sign change of the scalar curvature at s = {}",
                    num(th)
                ));
            }
        }
    }
    let mut out = per_point(&s, header, comments, |p| {
        let fp = s.m.adapted_frame(&p.x, &p.v)?;
        let general = closedform::tm_scalar(&s.m, &s.fam, &fp)?;
        let special = sign
            .map(|sg| specialized_scalar(&s.m, sg, &fp))
            .transpose()?;
        let arg = FiberArg::from_norm(fp.t);
        let j = s.fam.jets(arg)?;
        let ok =
            special.is_none_or(|x| (x - general).abs() <= SCAN_AGREEMENT * general.abs().max(1.0));
        let row = vec![
            num(arg.get()),
            num(general),
            special.map(num).unwrap_or_default(),
            num(j.f()),
            num(j.h()),
            if ok { "ok" } else { "mismatch" }.to_string(),
        ];
        let body = json!({
            "s": arg.get(), "scalar_general": general, "scalar_specialized": special,
            "F": j.f(), "H": j.h(), "ok": ok,
        });
        Ok((fp.t, vec![row], body))
    });
    let mismatch = out
        .json
        .get("points")
        .and_then(|p| p.as_array())
        .is_some_and(|a| a.iter().any(|p| p["result"]["ok"] == Value::Bool(false)));
    if mismatch {
        out.status = out.status.max(Status::Failure);
    }
    Ok(out)
}
