//! Numerical ground truth for the curvature of `(TM, G)`: the induced metric
//! is differentiated in all `2n` coordinates, its Levi-Civita curvature is
//! formed, and the result is contracted with the adapted frame.
//!
//! Nothing here calls into [`crate::closedform`] except [`compare`], which
//! puts the two side by side.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basemanifold::{AdaptedFramePoint, ChartManifold};
use crate::bundlemetric::{adapted_frame_vectors, induced_metric, BundlePoint};
use crate::closedform::{
    self, constcurv_mixed_legacy, frame_norms, ricci_from_table, scalar_from_ricci,
    sectional_from_table, ComponentClass, RicciTable, SectionalTables, TMCurvatureTable,
    VerticalRicciCoefficient,
};
use crate::error::{Error, Result};
use crate::metricfamily::{FiberArg, NaturalMetricFamily};
use crate::numdiff::{self, StepStrategy};
use crate::tensor::Tensor;

/// Condition number of `G` above which a warning is attached.
pub const CONDITION_WARNING: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-5,
            rel: 1e-3,
        }
    }
}

impl Tolerance {
    pub fn accepts(&self, closed: f64, oracle: f64) -> bool {
        (closed - oracle).abs() <= self.abs + self.rel * oracle.abs()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub step: StepStrategy,
    pub tolerance: Tolerance,
}

impl OracleConfig {
    /// Default tolerance for a step strategy: tight with extrapolation,
    /// loose for plain central differences.
    pub fn with_step(step: StepStrategy) -> Self {
        let tolerance = match step {
            StepStrategy::Richardson { .. } => Tolerance {
                abs: 1e-5,
                rel: 1e-3,
            },
            _ => Tolerance {
                abs: 1e-3,
                rel: 1e-2,
            },
        };
        OracleConfig { step, tolerance }
    }

    pub fn validate(&self) -> Result<()> {
        let h_ok = match self.step {
            StepStrategy::Fixed { h } | StepStrategy::Richardson { h } => h > 0.0 && h.is_finite(),
            StepStrategy::Scaled => true,
        };
        if !h_ok {
            return Err(Error::Config("oracle step must be positive".into()));
        }
        if !(self.tolerance.abs > 0.0 && self.tolerance.rel > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Frame-contracted numeric curvature of `(TM, G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub n: usize,
    /// `<R̄(e_a,e_b)e_c,e_d>` over the unnormalized adapted frame.
    pub data: Tensor,
    /// `|e_a|^2` measured with the induced metric.
    pub norms: Vec<f64>,
    pub condition: f64,
    pub warnings: Vec<String>,
}

/// Curvature of `(TM, G)` at `fp` by finite differences of the induced metric.
pub fn numeric_tm_curvature(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    fp: &AdaptedFramePoint,
    cfg: &OracleConfig,
) -> Result<NumericTable> {
    cfg.validate()?;
    let n = m.dim();
    let nn = 2 * n;
    let p = BundlePoint::new(fp.q.clone(), fp.v.clone());
    let y0 = p.coords();
    // the Christoffel stencil sits on top of the metric stencil
    m.require_interior(&fp.q, m.christoffel_levels() + 1)?;
    let so = numdiff::second_order(
        |y| {
            Ok(induced_metric(m, fam, &BundlePoint::from_coords(y))?
                .g
                .as_slice()
                .to_vec())
        },
        &y0,
        cfg.step,
    )?;
    let g = DMatrix::from_column_slice(nn, nn, &so.value);
    let ginv = g
        .clone()
        .cholesky()
        .ok_or(Error::SingularMetric { at: y0.clone() })?
        .inverse();
    let eig = g.clone().symmetric_eigenvalues();
    let condition = eig.max() / eig.min();
    let mut warnings = Vec::new();
    if condition > CONDITION_WARNING {
        warnings.push(format!("ConditioningWarning: cond(G) = {condition:e}"));
    }

    let dg = |k: usize, a: usize, b: usize| so.gradient[k][a + nn * b];
    let ddg = |k: usize, l: usize, a: usize, b: usize| so.hessian[k][l][a + nn * b];

    let low = Tensor::from_fn(nn, 3, |i| {
        let (l, mu, nu) = (i[0], i[1], i[2]);
        0.5 * (dg(mu, l, nu) + dg(nu, l, mu) - dg(l, mu, nu))
    });
    let gam = Tensor::from_fn(nn, 3, |i| {
        (0..nn)
            .map(|l| ginv[(i[0], l)] * low.at3(l, i[1], i[2]))
            .sum()
    });
    // d_k Γ^r_{mu nu} = -G^{ra} d_k G_{ab} Γ^b_{mu nu} + G^{rl} d_k Γ_{l mu nu}
    let dgam = Tensor::from_fn(nn, 4, |i| {
        let (k, r, mu, nu) = (i[0], i[1], i[2], i[3]);
        let mut s = 0.0;
        for a in 0..nn {
            let mut inner = 0.0;
            for b in 0..nn {
                inner += dg(k, a, b) * gam.at3(b, mu, nu);
            }
            let dlow = 0.5 * (ddg(k, mu, a, nu) + ddg(k, nu, a, mu) - ddg(k, a, mu, nu));
            s += ginv[(r, a)] * (dlow - inner);
        }
        s
    });
    // R^e_{cab} = d_a Γ^e_{bc} - d_b Γ^e_{ac} + Γ^e_{af} Γ^f_{bc} - Γ^e_{bf} Γ^f_{ac}
    let mixed = Tensor::from_fn(nn, 4, |i| {
        let (e, c, a, b) = (i[0], i[1], i[2], i[3]);
        let mut v = dgam.at4(a, e, b, c) - dgam.at4(b, e, a, c);
        for f in 0..nn {
            v += gam.at3(e, a, f) * gam.at3(f, b, c) - gam.at3(e, b, f) * gam.at3(f, a, c);
        }
        v
    });
    let lowered = Tensor::from_fn(nn, 4, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        (0..nn).map(|e| g[(d, e)] * mixed.at4(e, c, a, b)).sum()
    });
    let frame = adapted_frame_vectors(m, fp)?;
    let data = lowered.in_frame(&frame);
    let norms = frame
        .iter()
        .map(|e| {
            let mut s = 0.0;
            for a in 0..nn {
                for b in 0..nn {
                    s += g[(a, b)] * e[a] * e[b];
                }
            }
            s
        })
        .collect();
    Ok(NumericTable {
        n,
        data,
        norms,
        condition,
        warnings,
    })
}

/// Outcome of sign calibration between closed forms and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    /// `+1` or `-1`, applied to the oracle.
    pub sign: i8,
    /// True when no component was large enough to decide.
    pub underdetermined: bool,
    /// Preferred sign of each class, where determined.
    pub class_signs: Vec<ClassSign>,
    /// Classes whose preferred sign disagrees with `sign`.
    pub mixed: Vec<ComponentClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSign {
    pub class: ComponentClass,
    pub sign: Option<i8>,
}

/// Picks the global sign `s` minimizing `sum |closed - s*oracle|` over
/// components above `100 * abs` in both tables; each class also gets its own
/// preferred sign so that a class needing the other sign shows up as
/// `mixed` instead of being absorbed.
pub fn calibrate_sign<'a>(
    pairs: impl IntoIterator<Item = (&'a TMCurvatureTable, &'a Tensor)>,
    tol: &Tolerance,
) -> Calibration {
    let floor = 100.0 * tol.abs;
    let mut per_class = [(0.0f64, 0.0f64, false); 6];
    for (closed, oracle) in pairs {
        let n = closed.n;
        let m = 2 * n;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        let x = closed.get(a, b, c, d);
                        let y = oracle.at4(a, b, c, d);
                        if x.abs() > floor && y.abs() > floor {
                            let k = ComponentClass::ALL
                                .iter()
                                .position(|cl| *cl == ComponentClass::of(n, [a, b, c, d]))
                                .unwrap_or(0);
                            per_class[k].0 += (x - y).abs();
                            per_class[k].1 += (x + y).abs();
                            per_class[k].2 = true;
                        }
                    }
                }
            }
        }
    }
    let class_signs: Vec<ClassSign> = ComponentClass::ALL
        .iter()
        .zip(per_class)
        .map(|(class, (plus, minus, seen))| ClassSign {
            class: *class,
            sign: seen.then_some(if plus <= minus { 1 } else { -1 }),
        })
        .collect();
    let underdetermined = per_class.iter().all(|c| !c.2);
    let (plus, minus) = per_class
        .iter()
        .fold((0.0, 0.0), |(p, m), c| (p + c.0, m + c.1));
    let sign = if underdetermined || plus <= minus {
        1
    } else {
        -1
    };
    let mixed = class_signs
        .iter()
        .filter(|c| c.sign.is_some_and(|s| s != sign))
        .map(|c| c.class)
        .collect();
    Calibration {
        sign,
        underdetermined,
        class_signs,
        mixed,
    }
}

/// Deviation summary for one component class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: ComponentClass,
    pub count: usize,
    pub max_abs_closed: f64,
    pub max_abs_oracle: f64,
    pub max_abs_dev: f64,
    pub pass: bool,
}

/// A discrepancy between a stated formula and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub code: String,
    pub detail: String,
}

/// Closed-form invariants next to the same quantities traced from the
/// oracle table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantComparison {
    pub sectional_closed: SectionalTables,
    pub sectional_oracle: SectionalTables,
    pub sectional_max_dev: f64,
    pub ricci_closed: RicciTable,
    pub ricci_oracle: RicciTable,
    pub ricci_max_dev: f64,
    pub scalar_closed: f64,
    pub scalar_oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub manifold: String,
    pub family: String,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub config: OracleConfig,
}

/// Closed form against oracle at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub provenance: Provenance,
    pub error: Option<String>,
    pub t: f64,
    pub frame: Vec<Vec<f64>>,
    pub sign: i8,
    /// Row-major `2n x 2n x 2n x 2n` tables.
    pub closed: Vec<f64>,
    pub oracle: Vec<f64>,
    pub deviations: Vec<f64>,
    pub max_abs_dev: f64,
    pub max_rel_dev: f64,
    pub classes: Vec<ClassSummary>,
    pub invariants: Option<InvariantComparison>,
    pub discrepancies: Vec<Discrepancy>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

/// Result of [`compare`]: one report per point and the shared calibration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRun {
    pub manifold: String,
    pub family: String,
    pub calibration: Calibration,
    pub reports: Vec<CurvatureReport>,
    pub pass: bool,
}

struct PointData {
    fp: AdaptedFramePoint,
    closed: TMCurvatureTable,
    closed_inv: closedform::TMInvariants,
    legacy_ricci: RicciTable,
    oracle: NumericTable,
}

fn evaluate_point(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    p: &BundlePoint,
    cfg: &OracleConfig,
) -> Result<PointData> {
    let fp = m.adapted_frame(&p.x, &p.v)?;
    let jets = closedform::jets_at(fam, &fp)?;
    let fc = m.frame_curvature(&fp, true)?;
    let closed =
        closedform::tm_curvature_from_parts(&fc, jets, fp.t, closedform::table_meta(m, fam, &fp))?;
    let closed_inv = closedform::invariants_from_parts(&fc, &jets, fp.t)?;
    let legacy_ricci =
        closedform::tm_ricci_with(m, fam, &fp, VerticalRicciCoefficient::AlphaLinear)?;
    let oracle = numeric_tm_curvature(m, fam, &fp, cfg)?;
    Ok(PointData {
        fp,
        closed,
        closed_inv,
        legacy_ricci,
        oracle,
    })
}

fn error_report(prov: Provenance, message: String) -> CurvatureReport {
    CurvatureReport {
        provenance: prov,
        error: Some(message),
        t: 0.0,
        frame: Vec::new(),
        sign: 1,
        closed: Vec::new(),
        oracle: Vec::new(),
        deviations: Vec::new(),
        max_abs_dev: 0.0,
        max_rel_dev: 0.0,
        classes: Vec::new(),
        invariants: None,
        discrepancies: Vec::new(),
        warnings: Vec::new(),
        pass: false,
    }
}

fn build_report(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    prov: Provenance,
    d: &PointData,
    cal: &Calibration,
    cfg: &OracleConfig,
) -> CurvatureReport {
    let n = d.closed.n;
    let tol = cfg.tolerance;
    let s = f64::from(cal.sign);
    let closed = d.closed.data.as_slice();
    let oracle: Vec<f64> = d.oracle.data.as_slice().iter().map(|o| s * o).collect();
    let deviations: Vec<f64> = closed.iter().zip(&oracle).map(|(c, o)| c - o).collect();
    let max_abs_dev = deviations.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let max_rel_dev = deviations
        .iter()
        .zip(&oracle)
        .filter(|(_, o)| o.abs() > tol.abs)
        .fold(0.0f64, |acc, (x, o)| acc.max(x.abs() / o.abs()));

    let mut classes: Vec<ClassSummary> = ComponentClass::ALL
        .iter()
        .map(|c| ClassSummary {
            class: *c,
            count: 0,
            max_abs_closed: 0.0,
            max_abs_oracle: 0.0,
            max_abs_dev: 0.0,
            pass: true,
        })
        .collect();
    let m2 = 2 * n;
    let mut all_pass = true;
    for (k, ((c, o), dev)) in closed.iter().zip(&oracle).zip(&deviations).enumerate() {
        let idx = [
            k / (m2 * m2 * m2),
            (k / (m2 * m2)) % m2,
            (k / m2) % m2,
            k % m2,
        ];
        let cls = ComponentClass::of(n, idx);
        let pos = ComponentClass::ALL
            .iter()
            .position(|x| *x == cls)
            .unwrap_or(0);
        let entry = &mut classes[pos];
        entry.count += 1;
        entry.max_abs_closed = entry.max_abs_closed.max(c.abs());
        entry.max_abs_oracle = entry.max_abs_oracle.max(o.abs());
        entry.max_abs_dev = entry.max_abs_dev.max(dev.abs());
        if !tol.accepts(*c, *o) {
            entry.pass = false;
            all_pass = false;
        }
    }

    let mut discrepancies = Vec::new();
    for c in &cal.mixed {
        discrepancies.push(Discrepancy {
            code: "mixed-sign".into(),
            detail: format!(
                "class {} agrees with the oracle only under sign {}",
                c.label(),
                -cal.sign
            ),
        });
    }
    for c in classes.iter().filter(|c| !c.pass) {
        discrepancies.push(Discrepancy {
            code: format!("class-{}", c.class.label()),
            detail: format!("max deviation {:e} exceeds tolerance", c.max_abs_dev),
        });
    }

    // oracle-side invariants from the oracle's own frame norms
    let odata = Tensor::from_vec(m2, 4, oracle.clone());
    let sect_o = sectional_from_table(n, &odata, &d.oracle.norms);
    let ric_o = ricci_from_table(n, &odata, &d.oracle.norms);
    let scal_o = scalar_from_ricci(&ric_o, &d.oracle.norms);
    let inv = &d.closed_inv;
    let sectional_max_dev = inv.sectional.max_abs_diff(&sect_o);
    let ricci_max_dev = inv.ricci.max_abs_diff(&ric_o);

    let ricci_scale = ric_o.max_abs().max(1.0);
    let legacy_dev = d.legacy_ricci.max_abs_diff(&ric_o);
    if legacy_dev > tol.abs + tol.rel * ricci_scale {
        discrepancies.push(Discrepancy {
            code: "ricci-vertical-coefficient".into(),
            detail: format!(
                "vertical Ricci with coefficient alpha t^2/4 deviates from the oracle trace by {legacy_dev:e}; alpha^2 t^2/4 deviates by {ricci_max_dev:e}"
            ),
        });
    }
    if let Some(k0) = m.constant_curvature() {
        if let Ok(legacy) = constcurv_mixed_legacy(k0, fam, d.fp.t, n) {
            let mut bad = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let o = sect_o.hv[i][j];
                    if !tol.accepts(legacy[i][j], o) {
                        bad.push(format!(
                            "(i={},j={}): legacy {} oracle {}",
                            i + 1,
                            j + 1,
                            legacy[i][j],
                            o
                        ));
                    }
                }
            }
            if !bad.is_empty() {
                discrepancies.push(Discrepancy {
                    code: "constcurv-mixed-sectional".into(),
                    detail: format!(
                        "constant-curvature mixed sectional (alpha/4) K0 |v|^2 (d_ij + d_i1) disagrees at {}",
                        bad.join("; ")
                    ),
                });
            }
        }
    }

    let pass = all_pass && cal.mixed.is_empty();
    CurvatureReport {
        provenance: prov,
        error: None,
        t: d.fp.t,
        frame: d.fp.u.clone(),
        sign: cal.sign,
        closed: closed.to_vec(),
        oracle,
        deviations,
        max_abs_dev,
        max_rel_dev,
        classes,
        invariants: Some(InvariantComparison {
            sectional_closed: inv.sectional.clone(),
            sectional_oracle: sect_o,
            sectional_max_dev,
            ricci_closed: inv.ricci.clone(),
            ricci_oracle: ric_o,
            ricci_max_dev,
            scalar_closed: inv.scalar,
            scalar_oracle: scal_o,
        }),
        discrepancies,
        warnings: d.oracle.warnings.clone(),
        pass,
    }
}

/// Runs closed forms and the oracle at every point (in parallel), calibrates
/// the sign once over all points, and returns reports in point order.
pub fn compare(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    points: &[BundlePoint],
    cfg: &OracleConfig,
) -> Result<ComparisonRun> {
    compare_with_fixture(m, fam, points, cfg, |_| {})
}

/// [`compare`] with a hook that may alter each closed-form table before
/// calibration (used to check that planted errors are caught).
pub fn compare_with_fixture(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    points: &[BundlePoint],
    cfg: &OracleConfig,
    fixture: impl Fn(&mut TMCurvatureTable),
) -> Result<ComparisonRun> {
    cfg.validate()?;
    let mut data: Vec<std::result::Result<PointData, String>> = points
        .par_iter()
        .map(|p| evaluate_point(m, fam, p, cfg).map_err(|e| e.to_string()))
        .collect();
    for d in data.iter_mut().flatten() {
        fixture(&mut d.closed);
    }
    let cal = calibrate_sign(
        data.iter().flatten().map(|d| (&d.closed, &d.oracle.data)),
        &cfg.tolerance,
    );
    let reports: Vec<CurvatureReport> = points
        .iter()
        .zip(data)
        .map(|(p, d)| {
            let prov = Provenance {
                manifold: m.id.clone(),
                family: fam.name.clone(),
                x: p.x.clone(),
                v: p.v.clone(),
                config: *cfg,
            };
            match d {
                Ok(d) => build_report(m, fam, prov, &d, &cal, cfg),
                Err(e) => error_report(prov, e),
            }
        })
        .collect();
    let pass = reports.iter().all(|r| r.pass);
    Ok(ComparisonRun {
        manifold: m.id.clone(),
        family: fam.name.clone(),
        calibration: cal,
        reports,
        pass,
    })
}

/// Frame norms implied by the family at `t` (for tables built without the
/// oracle).
pub fn expected_norms(n: usize, fam: &NaturalMetricFamily, t: f64) -> Result<Vec<f64>> {
    Ok(frame_norms(n, &fam.jets(FiberArg::from_norm(t))?))
}

impl CurvatureReport {
    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let p = &self.provenance;
        if let Some(e) = &self.error {
            return format!(
                "{} {} x={:?} v={:?}: ERROR {e}",
                p.manifold, p.family, p.x, p.v
            );
        }
        let mut s = format!(
            "{} {} x={:?} v={:?} t={}: {} max|dev|={:.3e} max rel={:.3e} sign={:+}",
            p.manifold,
            p.family,
            p.x,
            p.v,
            self.t,
            if self.pass { "PASS" } else { "FAIL" },
            self.max_abs_dev,
            self.max_rel_dev,
            self.sign
        );
        for e in &self.discrepancies {
            s.push_str(&format!("\n  discrepancy {}: {}", e.code, e.detail));
        }
        for w in &self.warnings {
            s.push_str(&format!("\n  warning: {w}"));
        }
        s
    }
}
