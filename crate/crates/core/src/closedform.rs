//! Closed-form curvature of `(TM, G)` in the adapted frame
//! `e_1..e_n` (horizontal lifts) and `e_{n+1}..e_{2n}` (vertical lifts),
//! at a point `z = (q, u, t, 0, ..., 0)` with `v = t u_1`.
//!
//! Frame index `1` of the formulas is index `0` here. All family
//! coefficients are evaluated at `t^2 = |v|^2`.

use serde::{Deserialize, Serialize};

use crate::basemanifold::{AdaptedFramePoint, ChartManifold, FrameCurvature};
use crate::error::{Error, Result};
use crate::metricfamily::{FamilyJets, FiberArg, NaturalMetricFamily};
use crate::tensor::Tensor;

/// Which of the six component families a frame index pattern belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComponentClass {
    /// all horizontal
    #[serde(rename = "HHHH")]
    Hhhh,
    /// all vertical
    #[serde(rename = "VVVV")]
    Vvvv,
    /// one horizontal, three vertical
    #[serde(rename = "HVVV")]
    Hvvv,
    /// two vertical in the same slot pair
    #[serde(rename = "VVHH")]
    Vvhh,
    /// one vertical in each slot pair
    #[serde(rename = "HVHV")]
    Hvhv,
    /// one vertical
    #[serde(rename = "HHVH")]
    Hhvh,
}

impl ComponentClass {
    pub const ALL: [ComponentClass; 6] = [
        ComponentClass::Hhhh,
        ComponentClass::Vvvv,
        ComponentClass::Hvvv,
        ComponentClass::Vvhh,
        ComponentClass::Hvhv,
        ComponentClass::Hhvh,
    ];

    /// Class of `<R(e_a,e_b)e_c,e_d>` for `0 <= a,b,c,d < 2n`.
    pub fn of(n: usize, idx: [usize; 4]) -> ComponentClass {
        let v = idx.map(|i| i >= n);
        match v.iter().filter(|x| **x).count() {
            0 => ComponentClass::Hhhh,
            1 => ComponentClass::Hhvh,
            3 => ComponentClass::Hvvv,
            4 => ComponentClass::Vvvv,
            _ if v[0] == v[1] => ComponentClass::Vvhh,
            _ => ComponentClass::Hvhv,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ComponentClass::Hhhh => "HHHH",
            ComponentClass::Vvvv => "VVVV",
            ComponentClass::Hvvv => "HVVV",
            ComponentClass::Vvhh => "VVHH",
            ComponentClass::Hvhv => "HVHV",
            ComponentClass::Hhvh => "HHVH",
        }
    }
}

/// Where a table was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableMeta {
    pub manifold: String,
    pub family: String,
    pub q: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub t: f64,
}

/// `<R(e_a,e_b)e_c,e_d>` for all `a,b,c,d` in `0..2n`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct TMCurvatureTable {
    pub n: usize,
    pub data: Tensor,
    pub meta: TableMeta,
}

impl TMCurvatureTable {
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data.at4(a, b, c, d)
    }

    pub fn class_of(&self, a: usize, b: usize, c: usize, d: usize) -> ComponentClass {
        ComponentClass::of(self.n, [a, b, c, d])
    }

    /// Squared norms of the (orthogonal) frame vectors.
    pub fn frame_norms(&self, jets: &FamilyJets) -> Vec<f64> {
        frame_norms(self.n, jets)
    }

    /// Multiplies every component of one class by `k` (test fixtures).
    pub fn scale_class(&mut self, class: ComponentClass, k: f64) {
        let n = self.n;
        let mut t = Tensor::from_fn(2 * n, 4, |i| {
            let v = self.data.get(i);
            if ComponentClass::of(n, [i[0], i[1], i[2], i[3]]) == class {
                k * v
            } else {
                v
            }
        });
        std::mem::swap(&mut self.data, &mut t);
    }

    /// Largest violation of antisymmetry, pair symmetry and first Bianchi.
    pub fn symmetry_residual(&self) -> f64 {
        symmetry_residual(&self.data)
    }
}

pub(crate) fn symmetry_residual(r: &Tensor) -> f64 {
    let m = r.dim();
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let v = r.at4(a, b, c, d);
                    worst = worst
                        .max((v + r.at4(b, a, c, d)).abs())
                        .max((v + r.at4(a, b, d, c)).abs())
                        .max((v - r.at4(c, d, a, b)).abs())
                        .max((v + r.at4(b, c, a, d) + r.at4(c, a, b, d)).abs());
                }
            }
        }
    }
    worst
}

pub(crate) fn frame_norms(n: usize, j: &FamilyJets) -> Vec<f64> {
    let mut out = vec![1.0; 2 * n];
    out[n] = j.delta();
    for o in out.iter_mut().skip(n + 1) {
        *o = j.alpha;
    }
    out
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// `δ_il δ_jk - δ_jl δ_ik`.
pub fn epsilon(i: usize, j: usize, k: usize, l: usize) -> f64 {
    delta(i, l) * delta(j, k) - delta(j, l) * delta(i, k)
}

/// The six component families of the curvature in the adapted frame.
struct Parts<'a> {
    n: usize,
    t: f64,
    j: FamilyJets,
    r: &'a Tensor,
    dr: &'a Tensor,
}

impl Parts<'_> {
    fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.r.at4(i, j, k, l)
    }

    fn a(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let s: f64 = (0..self.n)
            .map(|r| {
                0.5 * self.r(i, j, r, 0) * self.r(k, l, r, 0)
                    + 0.25 * self.r(i, l, r, 0) * self.r(k, j, r, 0)
                    + 0.25 * self.r(j, l, r, 0) * self.r(i, k, r, 0)
            })
            .sum();
        self.t * self.t * self.j.alpha * s + self.r(i, j, k, l)
    }

    fn b(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let e = epsilon(i, j, k, l);
        if e == 0.0 {
            0.0
        } else if i == 0 || j == 0 {
            e * self.j.h()
        } else {
            e * self.j.f()
        }
    }

    fn d(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let (t2, al, ad, be) = (self.t * self.t, self.j.alpha, self.j.alpha_d1, self.j.beta);
        let (di, dj) = (delta(i, 0), delta(j, 0));
        let s: f64 = (0..self.n)
            .map(|r| {
                self.r(k, r, j, 0) * self.r(r, l, i, 0) - self.r(k, r, i, 0) * self.r(r, l, j, 0)
            })
            .sum();
        0.5 * (2.0 * al + (di + dj) * be * t2) * self.r(i, j, k, l)
            + 0.5 * di * (be - 2.0 * ad) * t2 * self.r(k, l, j, 0)
            + 0.5 * dj * (2.0 * ad - be) * t2 * self.r(k, l, i, 0)
            + al * al * t2 / 4.0 * s
    }

    fn e(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let (t2, al, ad) = (self.t * self.t, self.j.alpha, self.j.alpha_d1);
        let s: f64 = (0..self.n)
            .map(|r| self.r(k, r, j, 0) * self.r(r, i, l, 0))
            .sum();
        0.5 * al * self.r(k, i, l, j)
            + al * al * t2 / 4.0 * s
            + t2 / 2.0
                * (delta(j, 0) + delta(l, 0))
                * ad
                * (self.r(k, i, l, 0) - self.r(k, i, j, 0))
    }

    fn f(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.j.alpha * self.t / 2.0 * (self.dr.at5(j, i, l, k, 0) - self.dr.at5(i, j, l, k, 0))
    }

    /// Full table entry from the six families and the curvature symmetries.
    fn entry(&self, idx: [usize; 4]) -> f64 {
        let n = self.n;
        let [a, b, c, d] = idx;
        let h = |x: usize| x % n;
        let (i, j, k, l) = (h(a), h(b), h(c), h(d));
        let v = idx.map(|x| x >= n);
        match v {
            [false, false, false, false] => self.a(i, j, k, l),
            [true, true, true, true] => self.b(i, j, k, l),
            [true, true, false, false] => self.d(i, j, k, l),
            [false, false, true, true] => self.d(k, l, i, j),
            [false, true, false, true] => self.e(i, j, k, l),
            [false, true, true, false] => -self.e(i, j, l, k),
            [true, false, false, true] => -self.e(j, i, k, l),
            [true, false, true, false] => self.e(j, i, l, k),
            [false, false, true, false] => self.f(i, j, k, l),
            [false, false, false, true] => -self.f(i, j, l, k),
            [false, true, false, false] => -self.f(k, l, j, i),
            [true, false, false, false] => self.f(k, l, i, j),
            // one horizontal, three vertical
            _ => 0.0,
        }
    }
}

fn require_normal_form(fp: &AdaptedFramePoint) -> Result<()> {
    if fp.u.len() != fp.q.len() || fp.v.len() != fp.q.len() {
        return Err(Error::DegenerateInput(
            "frame does not match the base dimension".into(),
        ));
    }
    Ok(())
}

/// Family jets at `t^2` for a frame point.
pub fn jets_at(fam: &NaturalMetricFamily, fp: &AdaptedFramePoint) -> Result<FamilyJets> {
    fam.jets(FiberArg::from_norm(fp.t))
}

/// Assembles the table from base frame curvature and family jets.
pub fn tm_curvature_from_parts(
    fc: &FrameCurvature,
    jets: FamilyJets,
    t: f64,
    meta: TableMeta,
) -> Result<TMCurvatureTable> {
    let dr = fc.dr.as_ref().ok_or(Error::MissingNablaR)?;
    let n = fc.dim();
    let parts = Parts {
        n,
        t,
        j: jets,
        r: &fc.r,
        dr,
    };
    let data = Tensor::from_fn(2 * n, 4, |i| parts.entry([i[0], i[1], i[2], i[3]]));
    Ok(TMCurvatureTable { n, data, meta })
}

pub fn table_meta(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    fp: &AdaptedFramePoint,
) -> TableMeta {
    TableMeta {
        manifold: m.id.clone(),
        family: fam.name.clone(),
        q: fp.q.clone(),
        u: fp.u.clone(),
        t: fp.t,
    }
}

/// `<R̄(e_a,e_b)e_c,e_d>` for every frame index pattern.
pub fn tm_curvature(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    fp: &AdaptedFramePoint,
) -> Result<TMCurvatureTable> {
    require_normal_form(fp)?;
    let jets = jets_at(fam, fp)?;
    let fc = m.frame_curvature(fp, true)?;
    tm_curvature_from_parts(&fc, jets, fp.t, table_meta(m, fam, fp))
}

/// Sectional curvatures of the frame planes. Diagonal entries of `hh` and
/// `vv` are not planes and are left at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionalTables {
    /// `K̄(e_i, e_j)`
    pub hh: Vec<Vec<f64>>,
    /// `K̄(e_{n+i}, e_{n+j})`
    pub vv: Vec<Vec<f64>>,
    /// `K̄(e_i, e_{n+j})`
    pub hv: Vec<Vec<f64>>,
}

impl SectionalTables {
    pub fn max_abs_diff(&self, other: &SectionalTables) -> f64 {
        [
            (&self.hh, &other.hh),
            (&self.vv, &other.vv),
            (&self.hv, &other.hv),
        ]
        .iter()
        .flat_map(|(a, b)| a.iter().flatten().zip(b.iter().flatten()))
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}

fn sectional_formulas(fc: &FrameCurvature, j: &FamilyJets, t: f64) -> SectionalTables {
    let n = fc.dim();
    let r = &fc.r;
    let t2 = t * t;
    // |R(a,b)v|^2 = t^2 sum_m R(a,b,0,m)^2
    let hh = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    if i == k {
                        return 0.0;
                    }
                    let rv: f64 = (0..n).map(|m| r.at4(i, k, 0, m).powi(2)).sum::<f64>() * t2;
                    r.at4(i, k, k, i) - 0.75 * j.alpha * rv
                })
                .collect()
        })
        .collect();
    let vv = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    if i == k {
                        0.0
                    } else if i == 0 || k == 0 {
                        j.h() / (j.alpha * j.delta())
                    } else {
                        j.f() / (j.alpha * j.alpha)
                    }
                })
                .collect()
        })
        .collect();
    // |R(u_k, v) u_i|^2 = t^2 sum_m R(k,0,i,m)^2
    let hv = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    if k == 0 {
                        // R(u_1, v) = t R(u_1, u_1) = 0
                        return 0.0;
                    }
                    let s: f64 = (0..n).map(|m| r.at4(k, 0, i, m).powi(2)).sum();
                    j.alpha / 4.0 * t2 * s
                })
                .collect()
        })
        .collect();
    SectionalTables { hh, vv, hv }
}

/// Sectional curvature of the frame planes from the dedicated formulas.
pub fn tm_sectional(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    fp: &AdaptedFramePoint,
) -> Result<SectionalTables> {
    require_normal_form(fp)?;
    let jets = jets_at(fam, fp)?;
    let fc = m.frame_curvature(fp, false)?;
    Ok(sectional_formulas(&fc, &jets, fp.t))
}

/// Sectional curvatures read off any `2n`-frame curvature table (closed form
/// or numeric) given the frame norms.
pub fn sectional_from_table(n: usize, r: &Tensor, norms: &[f64]) -> SectionalTables {
    let k = |a: usize, b: usize| {
        if a == b {
            0.0
        } else {
            r.at4(a, b, b, a) / (norms[a] * norms[b])
        }
    };
    SectionalTables {
        hh: (0..n).map(|i| (0..n).map(|j| k(i, j)).collect()).collect(),
        vv: (0..n)
            .map(|i| (0..n).map(|j| k(n + i, n + j)).collect())
            .collect(),
        hv: (0..n)
            .map(|i| (0..n).map(|j| k(i, n + j)).collect())
            .collect(),
    }
}

/// Sectional tables on a space of constant curvature `k0`, with `t = |v|`.
///
/// `hh` follows the dedicated constant-curvature formula. `hv` is the general
/// mixed formula with `R(X,Y)Z = k0 (<Y,Z>X - <X,Z>Y)` substituted, which
/// gives `(α/4) k0^2 t^2 (δ_ij + δ_i1 - 2 δ_i1 δ_j1)`.
pub fn tm_sectional_constcurv(
    k0: f64,
    fam: &NaturalMetricFamily,
    t: f64,
    n: usize,
) -> Result<SectionalTables> {
    let j = fam.jets(FiberArg::from_norm(t))?;
    let t2 = t * t;
    let hh = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    if i == k {
                        0.0
                    } else {
                        k0 - 0.75 * k0 * k0 * j.alpha * (delta(i, 0) + delta(k, 0)) * t2
                    }
                })
                .collect()
        })
        .collect();
    let vv = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    if i == k {
                        0.0
                    } else if i == 0 || k == 0 {
                        j.h() / (j.alpha * j.delta())
                    } else {
                        j.f() / (j.alpha * j.alpha)
                    }
                })
                .collect()
        })
        .collect();
    let hv = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    let p = delta(i, k) + delta(i, 0) - 2.0 * delta(i, 0) * delta(k, 0);
                    j.alpha / 4.0 * k0 * k0 * t2 * p
                })
                .collect()
        })
        .collect();
    Ok(SectionalTables { hh, vv, hv })
}

/// The mixed constant-curvature table `K̄(e_i, e_{n+j})` in the form
/// `(α/4) k0 t^2 (δ_ij + δ_i1)`, kept to report where it disagrees with the
/// general formula.
pub fn constcurv_mixed_legacy(
    k0: f64,
    fam: &NaturalMetricFamily,
    t: f64,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    let (alpha, _) = fam.coefficients(FiberArg::from_norm(t))?;
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|k| alpha / 4.0 * k0 * t * t * (delta(i, k) + delta(i, 0)))
                .collect()
        })
        .collect())
}

/// Ricci tensor `R̄icc(e_a, e_b)` over the (unnormalized) adapted frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RicciTable {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl RicciTable {
    pub fn max_abs(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &RicciTable) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `R̄icc(X, Y) = sum_c <R̄(X, e_c) e_c, Y> / |e_c|^2` for any curvature table.
pub fn ricci_from_table(n: usize, r: &Tensor, norms: &[f64]) -> RicciTable {
    let m = 2 * n;
    RicciTable {
        n,
        rows: (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| (0..m).map(|c| r.at4(a, c, c, b) / norms[c]).sum())
                    .collect()
            })
            .collect(),
    }
}

/// Scalar curvature `sum_a R̄icc(e_a, e_a) / |e_a|^2`.
pub fn scalar_from_ricci(ric: &RicciTable, norms: &[f64]) -> f64 {
    (0..2 * ric.n).map(|a| ric.rows[a][a] / norms[a]).sum()
}

/// Coefficient in front of the `R R` sums of the vertical Ricci block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerticalRicciCoefficient {
    /// `α^2 t^2 / 4`, the value obtained by tracing the curvature table
    AlphaSquared,
    /// `α t^2 / 4`
    AlphaLinear,
}

fn ricci_formulas(
    fc: &FrameCurvature,
    j: &FamilyJets,
    t: f64,
    coef: VerticalRicciCoefficient,
) -> Result<RicciTable> {
    let dr = fc.dr.as_ref().ok_or(Error::MissingNablaR)?;
    let n = fc.dim();
    let r = &fc.r;
    let t2 = t * t;
    let nf = n as f64;
    let base = fc.invariants();
    let mut rows = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for p in 0..n {
                for l in 0..n {
                    s += r.at4(i, p, l, 0) * r.at4(k, p, l, 0);
                }
            }
            rows[i][k] = -j.alpha * t2 / 2.0 * s + base.ricci[i][k];
        }
    }
    // mixed block: trace of the HHVH family over the horizontal slots
    let parts = Parts { n, t, j: *j, r, dr };
    for i in 0..n {
        for k in 0..n {
            let v: f64 = (0..n).map(|l| -parts.f(i, l, k, l)).sum();
            rows[i][n + k] = v;
            rows[n + k][i] = v;
        }
    }
    let c = match coef {
        VerticalRicciCoefficient::AlphaSquared => j.alpha * j.alpha * t2 / 4.0,
        VerticalRicciCoefficient::AlphaLinear => j.alpha * t2 / 4.0,
    };
    let rr = |i: usize, k: usize| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for l in 0..n {
                s += r.at4(p, l, i, 0) * r.at4(p, l, k, 0);
            }
        }
        s
    };
    for i in 0..n {
        for k in 0..n {
            rows[n + i][n + k] = if i == 0 && k == 0 {
                (nf - 1.0) / j.alpha * j.h()
            } else if i == 0 || k == 0 {
                0.0
            } else if i == k {
                c * rr(i, i) + (nf - 2.0) / j.alpha * j.f() + j.h() / j.delta()
            } else {
                c * rr(i, k)
            };
        }
    }
    Ok(RicciTable { n, rows })
}

/// Ricci table from the dedicated formulas; the mixed block is the trace of
/// the `HHVH` family.
pub fn tm_ricci(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    fp: &AdaptedFramePoint,
) -> Result<RicciTable> {
    tm_ricci_with(m, fam, fp, VerticalRicciCoefficient::AlphaSquared)
}

pub fn tm_ricci_with(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    fp: &AdaptedFramePoint,
    coef: VerticalRicciCoefficient,
) -> Result<RicciTable> {
    require_normal_form(fp)?;
    let jets = jets_at(fam, fp)?;
    let fc = m.frame_curvature(fp, true)?;
    ricci_formulas(&fc, &jets, fp.t, coef)
}

fn scalar_formula(fc: &FrameCurvature, j: &FamilyJets, t: f64) -> f64 {
    let n = fc.dim();
    let nf = n as f64;
    let r = &fc.r;
    let s_base = fc.invariants().scalar;
    let mut rr = 0.0;
    for i in 0..n {
        for p in 0..n {
            for l in 0..n {
                rr += r.at4(i, p, l, 0).powi(2);
            }
        }
    }
    s_base - t * t * j.alpha / 4.0 * rr
        + 2.0 * (nf - 1.0) / (j.alpha * j.delta()) * j.h()
        + (nf - 1.0) * (nf - 2.0) / (j.alpha * j.alpha) * j.f()
}

/// Scalar curvature of `(TM, G)` at `v`.
pub fn tm_scalar(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    fp: &AdaptedFramePoint,
) -> Result<f64> {
    require_normal_form(fp)?;
    let jets = jets_at(fam, fp)?;
    let fc = m.frame_curvature(fp, false)?;
    Ok(scalar_formula(&fc, &jets, fp.t))
}

/// Sectional, Ricci and scalar curvature from the dedicated formulas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TMInvariants {
    pub sectional: SectionalTables,
    pub ricci: RicciTable,
    pub scalar: f64,
}

pub fn tm_invariants(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    fp: &AdaptedFramePoint,
) -> Result<TMInvariants> {
    require_normal_form(fp)?;
    let jets = jets_at(fam, fp)?;
    let fc = m.frame_curvature(fp, true)?;
    invariants_from_parts(&fc, &jets, fp.t)
}

pub(crate) fn invariants_from_parts(
    fc: &FrameCurvature,
    jets: &FamilyJets,
    t: f64,
) -> Result<TMInvariants> {
    Ok(TMInvariants {
        sectional: sectional_formulas(fc, jets, t),
        ricci: ricci_formulas(fc, jets, t, VerticalRicciCoefficient::AlphaSquared)?,
        scalar: scalar_formula(fc, jets, t),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpSign {
    Plus,
    Minus,
}

/// Scalar curvature of the exponential metrics over a space of constant
/// curvature `k0`, as a function of `s = |v|^2`.
pub fn scalar_exp_specials(k0: f64, n: usize, s: FiberArg, which: ExpSign) -> f64 {
    let nf = n as f64;
    let s = s.get();
    match which {
        ExpSign::Plus => {
            (nf - 1.0)
                * (k0 * (nf - k0 / 2.0 * s * s.exp())
                    - (-s).exp() * (2.0 + (nf - 2.0) * (1.0 + s)) / (1.0 + s))
        }
        ExpSign::Minus => {
            (nf - 1.0)
                * (k0 * (nf - k0 / 2.0 * s * (-s).exp())
                    + s.exp() / (1.0 + s) * ((nf - 2.0) * (3.0 - s) + (6.0 + 2.0 * s) / (1.0 + s)))
        }
    }
}

/// Scalar curvature of the exponential metrics from the base scalar
/// curvature and `sum_{i,j} |R(u_i,u_j)v|^2`, for an arbitrary base.
pub fn scalar_exp_remark(
    s_base: f64,
    rv_sq_sum: f64,
    n: usize,
    s: FiberArg,
    which: ExpSign,
) -> f64 {
    let nf = n as f64;
    let s = s.get();
    match which {
        ExpSign::Plus => {
            s_base
                - (nf - 1.0) * (-s).exp() * (2.0 + (nf - 2.0) * (1.0 + s)) / (1.0 + s)
                - s.exp() / 4.0 * rv_sq_sum
        }
        ExpSign::Minus => {
            s_base
                + (nf - 1.0) * s.exp() / (1.0 + s)
                    * ((nf - 2.0) * (3.0 - s) + (6.0 + 2.0 * s) / (1.0 + s))
                - (-s).exp() / 4.0 * rv_sq_sum
        }
    }
}

/// On a flat base of dimension `n >= 3`, the value of `|v|^2` where the
/// `exp-` scalar curvature changes sign.
pub fn exp_minus_zero_threshold(n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    Some(((nf - 1.0) + (4.0 * (nf - 2.0) * nf + 1.0).sqrt()) / (nf - 2.0))
}

/// Double trace of a `2n` frame table against the frame norms.
pub fn scalar_from_table(n: usize, r: &Tensor, norms: &[f64]) -> f64 {
    scalar_from_ricci(&ricci_from_table(n, r, norms), norms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metricfamily::{flatness_beta, FamilyPreset};
    use crate::scalarfun::ScalarFunction;

    fn fam(p: FamilyPreset) -> NaturalMetricFamily {
        p.build().unwrap()
    }

    fn presets() -> Vec<NaturalMetricFamily> {
        [
            FamilyPreset::Sasaki,
            FamilyPreset::CheegerGromoll,
            FamilyPreset::ExpPlus,
            FamilyPreset::ExpMinus,
        ]
        .into_iter()
        .map(fam)
        .collect()
    }

    fn bumpy() -> ChartManifold {
        "conformal:3:[[0.1,1,1,0],[0.05,0,2,1]]"
            .parse::<crate::basemanifold::ManifoldSpec>()
            .unwrap()
            .build()
            .unwrap()
    }

    #[test]
    fn class_lookup() {
        let n = 2;
        assert_eq!(ComponentClass::of(n, [0, 1, 1, 0]), ComponentClass::Hhhh);
        assert_eq!(ComponentClass::of(n, [2, 3, 3, 2]), ComponentClass::Vvvv);
        assert_eq!(ComponentClass::of(n, [0, 3, 3, 2]), ComponentClass::Hvvv);
        assert_eq!(ComponentClass::of(n, [2, 3, 0, 1]), ComponentClass::Vvhh);
        assert_eq!(ComponentClass::of(n, [0, 1, 2, 3]), ComponentClass::Vvhh);
        assert_eq!(ComponentClass::of(n, [0, 3, 1, 2]), ComponentClass::Hvhv);
        assert_eq!(ComponentClass::of(n, [3, 0, 0, 2]), ComponentClass::Hvhv);
        assert_eq!(ComponentClass::of(n, [0, 1, 2, 0]), ComponentClass::Hhvh);
    }

    #[test]
    fn flat_sasaki_is_flat() {
        let m = ChartManifold::euclidean(3);
        let fp = m.adapted_frame(&[0.1, 0.2, 0.3], &[1.0, 0.5, 0.0]).unwrap();
        let tab = tm_curvature(&m, &fam(FamilyPreset::Sasaki), &fp).unwrap();
        assert_eq!(tab.data.max_abs(), 0.0);
    }

    #[test]
    fn flat_base_flatness_family_is_flat() {
        let m = ChartManifold::euclidean(2);
        let alpha = ScalarFunction::parse("exp(t)").unwrap();
        let f = NaturalMetricFamily::new("flat", alpha.clone(), flatness_beta(&alpha));
        for v in [[0.0, 0.0], [0.3, 0.4], [1.0, -1.0]] {
            let fp = m.adapted_frame(&[0.0, 0.0], &v).unwrap();
            let tab = tm_curvature(&m, &f, &fp).unwrap();
            assert!(tab.data.max_abs() <= 1e-9);
        }
    }

    #[test]
    fn cheeger_gromoll_flat_base_has_vertical_curvature() {
        let m = ChartManifold::euclidean(3);
        let fp = m.adapted_frame(&[0.0; 3], &[0.0; 3]).unwrap();
        let tab = tm_curvature(&m, &fam(FamilyPreset::CheegerGromoll), &fp).unwrap();
        // <R(e_5, e_6) e_6, e_5> = F(0) = 3
        assert!((tab.get(4, 5, 5, 4) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_speed_horizontal_block_is_base_curvature() {
        let m = bumpy();
        let fp = m.adapted_frame(&[0.2, 0.1, -0.3], &[0.0; 3]).unwrap();
        let fc = m.frame_curvature(&fp, true).unwrap();
        for f in presets() {
            let tab = tm_curvature(&m, &f, &fp).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            assert_eq!(tab.get(i, j, k, l), fc.r.at4(i, j, k, l));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn assembled_table_has_curvature_symmetries() {
        let m = bumpy();
        let fp = m
            .adapted_frame(&[0.2, 0.1, -0.3], &[0.4, -0.6, 0.3])
            .unwrap();
        for f in presets() {
            let tab = tm_curvature(&m, &f, &fp).unwrap();
            let scale = tab.data.max_abs().max(1.0);
            assert!(
                tab.symmetry_residual() < 1e-9 * scale,
                "{}: {}",
                f.name,
                tab.symmetry_residual()
            );
        }
    }

    #[test]
    fn missing_nabla_r() {
        let m = ChartManifold::euclidean(2);
        let fp = m.adapted_frame(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        let fc = m.frame_curvature(&fp, false).unwrap();
        let j = jets_at(&fam(FamilyPreset::Sasaki), &fp).unwrap();
        let meta = table_meta(&m, &fam(FamilyPreset::Sasaki), &fp);
        assert!(matches!(
            tm_curvature_from_parts(&fc, j, fp.t, meta),
            Err(Error::MissingNablaR)
        ));
    }

    #[test]
    fn sectional_formulas_agree_with_table() {
        let m = bumpy();
        let fp = m
            .adapted_frame(&[0.2, 0.1, -0.3], &[0.4, -0.6, 0.3])
            .unwrap();
        for f in presets() {
            let tab = tm_curvature(&m, &f, &fp).unwrap();
            let j = jets_at(&f, &fp).unwrap();
            let from_table = sectional_from_table(3, &tab.data, &tab.frame_norms(&j));
            let direct = tm_sectional(&m, &f, &fp).unwrap();
            assert!(direct.max_abs_diff(&from_table) < 1e-10, "{}", f.name);
            for row in &direct.hv {
                assert!(row.iter().all(|k| *k >= -1e-12));
            }
            for row in &direct.hv {
                assert_eq!(row[0], 0.0);
            }
        }
    }

    #[test]
    fn sphere_sasaki_sectional_example() {
        let m = ChartManifold::sphere(2, 1.0);
        let fp = m.adapted_frame(&[0.3, 0.2], &[1.0, 0.0]).unwrap();
        let v: Vec<f64> = fp.u[0].clone();
        let fp = m.adapted_frame(&fp.q, &v).unwrap();
        assert!((fp.t - 1.0).abs() < 1e-15);
        let k = tm_sectional(&m, &fam(FamilyPreset::Sasaki), &fp).unwrap();
        assert!((k.hh[1][0] - 0.25).abs() < 1e-9);
        let cc = tm_sectional_constcurv(1.0, &fam(FamilyPreset::Sasaki), 1.0, 2).unwrap();
        assert!((cc.hh[0][1] - 0.25).abs() < 1e-15);
        assert_eq!(cc.hv[0][0], 0.0);
        assert!(k.max_abs_diff(&cc) < 1e-9);
        let legacy = constcurv_mixed_legacy(1.0, &fam(FamilyPreset::Sasaki), 1.0, 2).unwrap();
        assert_eq!(legacy[0][0], 0.5);
    }

    #[test]
    fn constcurv_zero_is_zero_for_sasaki() {
        let cc = tm_sectional_constcurv(0.0, &fam(FamilyPreset::Sasaki), 2.0, 3).unwrap();
        assert!(cc
            .hh
            .iter()
            .chain(&cc.vv)
            .chain(&cc.hv)
            .flatten()
            .all(|x| *x == 0.0));
    }

    #[test]
    fn constcurv_shortcut_matches_general_on_space_forms() {
        for (m, k0) in [
            (ChartManifold::sphere(3, 1.0), 1.0),
            (ChartManifold::hyperbolic(3), -1.0),
            (ChartManifold::sphere(2, 2.0), 0.25),
        ] {
            let n = m.dim();
            let q = vec![0.1; n];
            let mut v = vec![0.0; n];
            v[n - 1] = 0.7;
            let fp = m.adapted_frame(&q, &v).unwrap();
            for f in presets() {
                let a = tm_sectional(&m, &f, &fp).unwrap();
                let b = tm_sectional_constcurv(k0, &f, fp.t, n).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-8, "{} {}", m.id, f.name);
            }
        }
    }

    #[test]
    fn ricci_and_scalar_agree_with_traces() {
        let m = bumpy();
        let fp = m
            .adapted_frame(&[0.2, 0.1, -0.3], &[0.4, -0.6, 0.3])
            .unwrap();
        for f in presets() {
            let tab = tm_curvature(&m, &f, &fp).unwrap();
            let j = jets_at(&f, &fp).unwrap();
            let norms = tab.frame_norms(&j);
            let traced = ricci_from_table(3, &tab.data, &norms);
            let direct = tm_ricci(&m, &f, &fp).unwrap();
            assert!(direct.max_abs_diff(&traced) < 1e-10, "{}", f.name);
            let s = tm_scalar(&m, &f, &fp).unwrap();
            assert!((s - scalar_from_table(3, &tab.data, &norms)).abs() < 1e-9);
            let alt = tm_ricci_with(&m, &f, &fp, VerticalRicciCoefficient::AlphaLinear).unwrap();
            if f.name != "sasaki" {
                assert!(alt.max_abs_diff(&traced) > 1e-6, "{}", f.name);
            }
        }
    }

    #[test]
    fn zero_speed_ricci_is_base_ricci() {
        let m = bumpy();
        let fp = m.adapted_frame(&[0.2, 0.1, -0.3], &[0.0; 3]).unwrap();
        let base = m.base_invariants(&fp).unwrap();
        let r = tm_ricci(&m, &fam(FamilyPreset::CheegerGromoll), &fp).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(r.rows[i][j], base.ricci[i][j]);
            }
        }
    }

    #[test]
    fn flat_exp_plus_scalar_at_zero() {
        let m = ChartManifold::euclidean(2);
        let fp = m.adapted_frame(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let s = tm_scalar(&m, &fam(FamilyPreset::ExpPlus), &fp).unwrap();
        assert!((s + 2.0).abs() < 1e-12);
        let sp = scalar_exp_specials(0.0, 2, FiberArg::from_sq(0.0), ExpSign::Plus);
        assert!((sp + 2.0).abs() < 1e-15);
    }

    #[test]
    fn exp_specials_match_general_on_space_forms() {
        for (m, k0) in [
            (ChartManifold::sphere(2, 1.0), 1.0),
            (ChartManifold::sphere(3, 1.0), 1.0),
            (ChartManifold::hyperbolic(3), -1.0),
            (ChartManifold::euclidean(3), 0.0),
        ] {
            let n = m.dim();
            for speed in [0.0, 0.5, 1.0, 2.0] {
                let mut v = vec![0.0; n];
                v[0] = 1.0;
                let q = vec![0.1; n];
                let t0 = m.adapted_frame(&q, &v).unwrap().t;
                v[0] = speed / t0;
                let fp = m.adapted_frame(&q, &v).unwrap();
                for (which, p) in [
                    (ExpSign::Plus, FamilyPreset::ExpPlus),
                    (ExpSign::Minus, FamilyPreset::ExpMinus),
                ] {
                    let general = tm_scalar(&m, &fam(p), &fp).unwrap();
                    let special = scalar_exp_specials(k0, n, FiberArg::from_norm(fp.t), which);
                    let tol = 1e-8 * general.abs().max(1.0);
                    assert!(
                        (general - special).abs() < tol,
                        "{} {speed}: {general} {special}",
                        m.id
                    );
                }
            }
        }
    }

    #[test]
    fn exp_remark_matches_general_on_curved_base() {
        let m = bumpy();
        let fp = m
            .adapted_frame(&[0.2, 0.1, -0.3], &[0.4, -0.6, 0.3])
            .unwrap();
        let fc = m.frame_curvature(&fp, false).unwrap();
        let base = fc.invariants();
        let mut rv = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    rv += (fp.t * fc.r.at4(i, j, 0, k)).powi(2);
                }
            }
        }
        for (which, p) in [
            (ExpSign::Plus, FamilyPreset::ExpPlus),
            (ExpSign::Minus, FamilyPreset::ExpMinus),
        ] {
            let general = tm_scalar(&m, &fam(p), &fp).unwrap();
            let remark = scalar_exp_remark(base.scalar, rv, 3, FiberArg::from_norm(fp.t), which);
            assert!((general - remark).abs() < 1e-9 * general.abs().max(1.0));
        }
    }

    #[test]
    fn exp_minus_threshold() {
        let s = exp_minus_zero_threshold(3).unwrap();
        assert!((s - (2.0 + 13f64.sqrt())).abs() < 1e-14);
        assert!((s - 5.60555).abs() < 1e-5);
        assert!(scalar_exp_specials(0.0, 3, FiberArg::from_sq(s), ExpSign::Minus).abs() < 1e-9);
        assert!(exp_minus_zero_threshold(2).is_none());
        // positive below, negative above
        assert!(scalar_exp_specials(0.0, 3, FiberArg::from_sq(s - 0.01), ExpSign::Minus) > 0.0);
        assert!(scalar_exp_specials(0.0, 3, FiberArg::from_sq(s + 0.01), ExpSign::Minus) < 0.0);
        for n in 3..8 {
            let s = exp_minus_zero_threshold(n).unwrap();
            assert!(
                scalar_exp_specials(0.0, n, FiberArg::from_sq(s), ExpSign::Minus).abs()
                    < 1e-8 * s.exp()
            );
        }
    }

    #[test]
    fn exp_families_are_not_constant_curvature() {
        let m = ChartManifold::euclidean(3);
        let fp = m.adapted_frame(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        for p in [FamilyPreset::ExpPlus, FamilyPreset::ExpMinus] {
            let k = tm_sectional(&m, &fam(p), &fp).unwrap();
            let vals: Vec<f64> =
                k.hh.iter()
                    .chain(&k.vv)
                    .chain(&k.hv)
                    .flatten()
                    .copied()
                    .collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(hi - lo > 1e-6);
        }
    }
}
