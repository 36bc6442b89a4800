//! Natural metric families `(alpha, beta)` on the tangent bundle and the
//! scalar functions derived from them.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalarfun::{ScalarFunction, Taylor, Univariate};

pub const DEFAULT_T_MAX: f64 = 25.0;
pub const DEFAULT_GRID: usize = 4096;

/// Argument of `alpha`, `beta`, `F` and `H`.
///
/// The coefficient functions are always evaluated at the *squared* fiber
/// norm `|v|^2`; constructing this type is the only place where that
/// conversion happens.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FiberArg(f64);

impl FiberArg {
    /// Argument for a tangent vector of norm `t`, i.e. `t^2`.
    pub fn from_norm(t: f64) -> Self {
        FiberArg(t * t)
    }

    /// Argument given directly (already a squared norm).
    pub fn from_sq(s: f64) -> Self {
        FiberArg(s)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "preset")]
pub enum FamilyPreset {
    Sasaki,
    CheegerGromoll,
    ExpPlus,
    ExpMinus,
    Custom {
        alpha: String,
        beta: String,
    },
    /// `beta` obtained from `alpha` by [`flatness_beta`].
    Flatness {
        alpha: String,
    },
}

impl FamilyPreset {
    pub fn name(&self) -> String {
        match self {
            FamilyPreset::Sasaki => "sasaki".into(),
            FamilyPreset::CheegerGromoll => "cheeger-gromoll".into(),
            FamilyPreset::ExpPlus => "exp+".into(),
            FamilyPreset::ExpMinus => "exp-".into(),
            FamilyPreset::Custom { alpha, beta } => format!("custom(alpha={alpha}, beta={beta})"),
            FamilyPreset::Flatness { alpha } => format!("flat(alpha={alpha})"),
        }
    }

    pub fn build(&self) -> Result<NaturalMetricFamily> {
        let (alpha, beta) = match self {
            FamilyPreset::Sasaki => ("1", "0"),
            FamilyPreset::CheegerGromoll => ("1/(1+t)", "1/(1+t)"),
            FamilyPreset::ExpPlus => ("exp(t)", "exp(t)"),
            FamilyPreset::ExpMinus => ("exp(-t)", "exp(-t)"),
            FamilyPreset::Custom { alpha, beta } => (alpha.as_str(), beta.as_str()),
            FamilyPreset::Flatness { alpha } => {
                let a = ScalarFunction::parse(alpha)?;
                let b = flatness_beta(&a);
                return Ok(NaturalMetricFamily::new(self.name(), a, b));
            }
        };
        Ok(NaturalMetricFamily::new(
            self.name(),
            ScalarFunction::parse(alpha)?,
            ScalarFunction::parse(beta)?,
        ))
    }
}

impl FromStr for FamilyPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sasaki" => Ok(FamilyPreset::Sasaki),
            "cheeger-gromoll" | "cg" => Ok(FamilyPreset::CheegerGromoll),
            "exp+" | "exp-plus" => Ok(FamilyPreset::ExpPlus),
            "exp-" | "exp-minus" => Ok(FamilyPreset::ExpMinus),
            other => Err(Error::Config(format!("unknown family preset `{other}`"))),
        }
    }
}

/// Jets of the coefficient functions at one argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyJets {
    pub arg: f64,
    pub alpha: f64,
    pub alpha_d1: f64,
    pub alpha_d2: f64,
    pub beta: f64,
    pub beta_d1: f64,
}

impl FamilyJets {
    /// `alpha + t*beta`.
    pub fn delta(&self) -> f64 {
        self.alpha + self.arg * self.beta
    }

    /// `alpha + t*alpha'`.
    pub fn phi(&self) -> f64 {
        self.alpha + self.arg * self.alpha_d1
    }

    pub fn f(&self) -> f64 {
        let t = self.arg;
        (self.alpha * self.beta
            - t * self.alpha_d1 * self.alpha_d1
            - 2.0 * self.alpha * self.alpha_d1)
            / self.delta()
    }

    pub fn h(&self) -> f64 {
        let t = self.arg;
        let (a, a1, a2) = (self.alpha, self.alpha_d1, self.alpha_d2);
        let delta = self.delta();
        let delta_d1 = a1 + self.beta + t * self.beta_d1;
        let phi_d1 = 2.0 * a1 + t * a2;
        self.phi() * (a1 * delta + a * delta_d1) / (a * delta) - 2.0 * phi_d1
    }
}

/// The two kinds of pointwise validity failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    AlphaNonPositive,
    DeltaNonPositive,
    PhiNonPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub family: String,
    pub t_max: f64,
    pub samples: usize,
    /// First `t` where `alpha > 0` or `alpha + t beta > 0` fails.
    pub violation: Option<Violation>,
    /// First `t` where `alpha + t alpha' > 0` fails (informational).
    pub phi_violation: Option<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

/// A natural metric family, immutable after construction.
#[derive(Clone)]
pub struct NaturalMetricFamily {
    pub name: String,
    pub alpha: ScalarFunction,
    pub beta: ScalarFunction,
    pub t_max: f64,
}

impl fmt::Debug for NaturalMetricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NaturalMetricFamily")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("t_max", &self.t_max)
            .finish()
    }
}

impl NaturalMetricFamily {
    pub fn new(name: impl Into<String>, alpha: ScalarFunction, beta: ScalarFunction) -> Self {
        NaturalMetricFamily {
            name: name.into(),
            alpha,
            beta,
            t_max: DEFAULT_T_MAX,
        }
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn preset(p: FamilyPreset) -> Result<Self> {
        p.build()
    }

    fn invalid(&self, t: f64, reason: impl Into<String>) -> Error {
        Error::Validity {
            family: self.name.clone(),
            t,
            reason: reason.into(),
        }
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if !(0.0..=self.t_max).contains(&t) {
            return Err(self.invalid(t, format!("outside validated range [0, {}]", self.t_max)));
        }
        Ok(())
    }

    /// `(alpha, beta)` values, used by the metric assembly.
    pub fn coefficients(&self, arg: FiberArg) -> Result<(f64, f64)> {
        let t = arg.get();
        self.check_range(t)?;
        let a = self.alpha.value(t)?;
        let b = self.beta.value(t)?;
        if a <= 0.0 {
            return Err(self.invalid(t, "alpha <= 0"));
        }
        if a + t * b <= 0.0 {
            return Err(self.invalid(t, "alpha + t*beta <= 0"));
        }
        Ok((a, b))
    }

    /// Jets needed by the curvature formulas: `alpha` to second order,
    /// `beta` to first order.
    pub fn jets(&self, arg: FiberArg) -> Result<FamilyJets> {
        let t = arg.get();
        self.check_range(t)?;
        let a = self.alpha.taylor(t, 2)?;
        let b = self.beta.taylor(t, 1)?;
        let j = FamilyJets {
            arg: t,
            alpha: a.derivative(0),
            alpha_d1: a.derivative(1),
            alpha_d2: a.derivative(2),
            beta: b.derivative(0),
            beta_d1: b.derivative(1),
        };
        if j.alpha <= 0.0 {
            return Err(self.invalid(t, "alpha <= 0"));
        }
        if j.delta() <= 0.0 {
            return Err(self.invalid(t, "alpha + t*beta <= 0"));
        }
        Ok(j)
    }

    /// `F(t) = (alpha beta - t alpha'^2 - 2 alpha alpha') / (alpha + t beta)`.
    pub fn f(&self, arg: FiberArg) -> Result<f64> {
        Ok(self.jets(arg)?.f())
    }

    /// `H(t) = phi (d/dt) ln(alpha Delta) - 2 phi'`.
    pub fn h(&self, arg: FiberArg) -> Result<f64> {
        Ok(self.jets(arg)?.h())
    }

    /// `alpha(|xi|^2) Id + beta(|xi|^2) xi xi^T`.
    pub fn fiber_block(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        let n = xi.len();
        let s: f64 = xi.iter().map(|x| x * x).sum();
        let (a, b) = self.coefficients(FiberArg::from_sq(s))?;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { a } else { 0.0 };
            id + b * xi[i] * xi[j]
        }))
    }

    /// Samples `[0, t_max]` on `samples` evenly spaced points (endpoint
    /// included) and reports the first place where validity fails.
    ///
    /// Touching zeros between samples are located by bisecting on the sign
    /// change of the derivative and testing the local minimum.
    pub fn validate(&self, samples: usize) -> Result<ValidationReport> {
        if samples < 2 {
            return Err(Error::Config("validation needs at least 2 samples".into()));
        }
        let alpha = |t: f64| self.alpha.taylor(t, 1);
        let delta = |t: f64| -> Result<Taylor> {
            let a = self.alpha.taylor(t, 1)?;
            let b = self.beta.taylor(t, 1)?;
            Ok(a + Taylor::variable(t, 1) * b)
        };
        let phi = |t: f64| -> Result<Taylor> {
            let a = self.alpha.taylor(t, 2)?;
            let da = a.differentiate();
            Ok(a.truncate(1) + Taylor::variable(t, 1) * da)
        };
        let grid: Vec<f64> = (0..samples)
            .map(|k| self.t_max * k as f64 / (samples - 1) as f64)
            .collect();

        let first_alpha = first_nonpositive(&grid, alpha)?;
        let first_delta = first_nonpositive(&grid, delta)?;
        let violation = match (first_alpha, first_delta) {
            (Some(a), Some(d)) if d < a => Some(Violation {
                t: d,
                kind: ViolationKind::DeltaNonPositive,
            }),
            (Some(a), _) => Some(Violation {
                t: a,
                kind: ViolationKind::AlphaNonPositive,
            }),
            (None, Some(d)) => Some(Violation {
                t: d,
                kind: ViolationKind::DeltaNonPositive,
            }),
            (None, None) => None,
        };
        let phi_violation = first_nonpositive(&grid, phi)?.map(|t| Violation {
            t,
            kind: ViolationKind::PhiNonPositive,
        });
        Ok(ValidationReport {
            family: self.name.clone(),
            t_max: self.t_max,
            samples,
            violation,
            phi_violation,
        })
    }

    /// Max of `|F|` and `|H|` over the validation grid.
    pub fn max_abs_f_h(&self, samples: usize) -> Result<(f64, f64)> {
        let mut mf: f64 = 0.0;
        let mut mh: f64 = 0.0;
        for k in 0..samples {
            let t = self.t_max * k as f64 / (samples - 1) as f64;
            let j = self.jets(FiberArg::from_sq(t))?;
            mf = mf.max(j.f().abs());
            mh = mh.max(j.h().abs());
        }
        Ok((mf, mh))
    }
}

/// Relative threshold below which a local minimum counts as touching zero.
const TOUCH_REL: f64 = 1e-12;

fn first_nonpositive<F>(grid: &[f64], f: F) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<Taylor>,
{
    let mut prev: Option<(f64, Taylor)> = None;
    for &t in grid {
        let s = f(t)?;
        if s.value() <= 0.0 {
            return Ok(Some(match &prev {
                Some((t0, _)) => bisect(|x| Ok(f(x)?.value()), *t0, t)?,
                None => t,
            }));
        }
        if let Some((t0, s0)) = &prev {
            if s0.derivative(1) < 0.0 && s.derivative(1) > 0.0 {
                let tm = bisect(|x| Ok(f(x)?.derivative(1)), *t0, t)?;
                let m = f(tm)?;
                let scale = s0.value().abs().max(s.value().abs()).max(1.0);
                if m.value() <= TOUCH_REL * scale {
                    return Ok(Some(tm));
                }
            }
        }
        prev = Some((t, s));
    }
    Ok(None)
}

/// Bisection for a sign change of `g` on `[lo, hi]` where `g(lo) > 0 >= g(hi)`
/// or `g(lo) < 0 < g(hi)`.
fn bisect<G>(g: G, mut lo: f64, mut hi: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let g_lo = g(lo)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (g(mid)? > 0.0) == (g_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `beta(t) = (t alpha'(t)^2 + 2 alpha(t) alpha'(t)) / alpha(t)`, the choice
/// that makes `F` vanish identically.
pub fn flatness_beta(alpha: &ScalarFunction) -> ScalarFunction {
    ScalarFunction::new(FlatnessBeta {
        alpha: alpha.clone(),
    })
}

struct FlatnessBeta {
    alpha: ScalarFunction,
}

impl Univariate for FlatnessBeta {
    fn taylor(&self, t: f64, order: usize) -> Result<Taylor> {
        let a_ext = self.alpha.taylor(t, order + 1)?;
        let da = a_ext.differentiate();
        let a = a_ext.truncate(order);
        if a.value() == 0.0 {
            return Err(Error::Domain {
                node: self.describe(),
                t,
            });
        }
        let tt = Taylor::variable(t, order);
        let two = Taylor::constant(2.0, order);
        let num = &tt * &(&da * &da) + &two * &(&a * &da);
        Ok(num / a)
    }

    fn describe(&self) -> String {
        format!("flatness_beta({})", self.alpha)
    }
}
