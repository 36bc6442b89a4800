//! Chart-defined Riemannian base manifolds: Christoffel symbols, curvature,
//! its covariant derivative, and orthonormal frames adapted to a tangent
//! vector.
//!
//! Curvature convention: `R(X,Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_[X,Y] Z` and
//! `R_{ijlm} = g(R(u_i,u_j)u_l, u_m)`, so that `R_{ijji}` is the sectional
//! curvature `K(u_i,u_j)` (`+1` on the unit sphere).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numdiff::{self, StepStrategy};
use crate::tensor::Tensor;

/// Chart domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Whole,
    /// Coordinate box `lo <= x <= hi`.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Open ball `|x| < radius` about the origin.
    Ball {
        radius: f64,
    },
}

impl Domain {
    /// Distance from `x` to the boundary (infinite for the whole chart).
    pub fn clearance(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Whole => f64::INFINITY,
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(x, (l, h))| (x - l).min(h - x))
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { radius } => radius - x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// Metric components `g_ab(x)` with optional analytic Christoffel symbols.
pub trait MetricField: Send + Sync {
    fn metric(&self, x: &[f64]) -> DMatrix<f64>;

    /// `Gamma^a_bc` stored as `[a][b][c]`, when known in closed form.
    fn christoffels(&self, _x: &[f64]) -> Option<Tensor> {
        None
    }
}

/// Flat metric.
struct Flat {
    dim: usize,
}

impl MetricField for Flat {
    fn metric(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }

    fn christoffels(&self, _x: &[f64]) -> Option<Tensor> {
        Some(Tensor::zeros(self.dim, 3))
    }
}

/// Log conformal factor `f` of a metric `e^{2f} δ`.
trait ConformalFactor: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

struct Conformal<F> {
    dim: usize,
    factor: F,
}

impl<F: ConformalFactor> MetricField for Conformal<F> {
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        let s = (2.0 * self.factor.value(x)).exp();
        DMatrix::identity(self.dim, self.dim) * s
    }

    fn christoffels(&self, x: &[f64]) -> Option<Tensor> {
        let df = self.factor.gradient(x);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Some(Tensor::from_fn(self.dim, 3, |i| {
            let (a, b, c) = (i[0], i[1], i[2]);
            d(a, b) * df[c] + d(a, c) * df[b] - d(b, c) * df[a]
        }))
    }
}

/// Stereographic chart of the round sphere of radius `r`.
struct Stereographic {
    radius: f64,
}

impl ConformalFactor for Stereographic {
    fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / (self.radius * self.radius);
        2f64.ln() - s.ln_1p()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r2 = self.radius * self.radius;
        let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / r2;
        x.iter().map(|v| -2.0 * v / r2 / (1.0 + s)).collect()
    }
}

/// Poincaré ball model of hyperbolic space.
struct PoincareBall;

impl ConformalFactor for PoincareBall {
    fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|v| v * v).sum();
        2f64.ln() - (1.0 - s).ln()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s: f64 = x.iter().map(|v| v * v).sum();
        x.iter().map(|v| 2.0 * v / (1.0 - s)).collect()
    }
}

/// Polynomial log conformal factor `f(x) = sum_k c_k prod_i x_i^{e_ki}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coef: f64,
    pub powers: Vec<u32>,
}

struct Polynomial {
    terms: Vec<PolyTerm>,
}

impl ConformalFactor for Polynomial {
    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.powers
                        .iter()
                        .zip(x)
                        .map(|(&p, &xi)| xi.powi(p as i32))
                        .product::<f64>()
            })
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|k| {
                self.terms
                    .iter()
                    .filter(|t| t.powers.get(k).copied().unwrap_or(0) > 0)
                    .map(|t| {
                        let mut prod = t.coef;
                        for (i, (&p, &xi)) in t.powers.iter().zip(x).enumerate() {
                            prod *= if i == k {
                                p as f64 * xi.powi(p as i32 - 1)
                            } else {
                                xi.powi(p as i32)
                            };
                        }
                        prod
                    })
                    .sum()
            })
            .collect()
    }
}

/// Polar (hyperspherical) chart of the sphere of radius `r`:
/// `g = r^2 diag(1, sin^2 x_0, sin^2 x_0 sin^2 x_1, ...)`.
struct PolarSphere {
    dim: usize,
    radius: f64,
}

impl PolarSphere {
    fn diag(&self, x: &[f64]) -> Vec<f64> {
        let mut h = Vec::with_capacity(self.dim);
        let mut acc = self.radius * self.radius;
        for a in 0..self.dim {
            h.push(acc);
            acc *= x[a].sin().powi(2);
        }
        h
    }
}

impl MetricField for PolarSphere {
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.diag(x)))
    }

    fn christoffels(&self, x: &[f64]) -> Option<Tensor> {
        let n = self.dim;
        let h = self.diag(x);
        // d_b h_a / h_a = 2 cot(x_b) when b < a
        let dlog = |b: usize, a: usize| {
            if b < a {
                2.0 * x[b].cos() / x[b].sin()
            } else {
                0.0
            }
        };
        let mut g = Tensor::zeros(n, 3);
        for a in 0..n {
            for b in 0..n {
                // Gamma^a_ab = Gamma^a_ba = d_b h_a / (2 h_a)
                let v = 0.5 * dlog(b, a);
                if v != 0.0 {
                    g.set(&[a, a, b], v);
                    g.set(&[a, b, a], v);
                }
                // Gamma^a_bb = -d_a h_b / (2 h_a) for a != b
                if a != b {
                    let w = -0.5 * dlog(a, b) * h[b] / h[a];
                    if w != 0.0 {
                        g.set(&[a, b, b], w);
                    }
                }
            }
        }
        Some(g)
    }
}

/// A metric given only by its components; Christoffels by finite differences.
pub struct NumericMetric<F> {
    pub f: F,
}

impl<F> MetricField for NumericMetric<F>
where
    F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync,
{
    fn metric(&self, x: &[f64]) -> DMatrix<f64> {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SphereChart {
    #[default]
    Stereographic,
    Polar,
}

/// Catalog entry, as selected on the command line or in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum ManifoldSpec {
    Euclidean {
        dim: usize,
    },
    Sphere {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        chart: SphereChart,
    },
    Hyperbolic {
        dim: usize,
    },
    /// `g = e^{2f} δ` with polynomial `f`.
    #[serde(alias = "torus-conformal")]
    Conformal {
        dim: usize,
        terms: Vec<PolyTerm>,
    },
}

fn one() -> f64 {
    1.0
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<ChartManifold> {
        ChartManifold::from_spec(self)
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldSpec::Euclidean { dim } => write!(f, "euclidean:{dim}"),
            ManifoldSpec::Sphere { dim, radius, chart } => {
                let id = match chart {
                    SphereChart::Stereographic => "sphere",
                    SphereChart::Polar => "sphere-polar",
                };
                if *radius == 1.0 {
                    write!(f, "{id}:{dim}")
                } else {
                    write!(f, "{id}:{dim}:{radius}")
                }
            }
            ManifoldSpec::Hyperbolic { dim } => write!(f, "hyperbolic:{dim}"),
            ManifoldSpec::Conformal { dim, terms } => {
                let arr: Vec<Vec<f64>> = terms
                    .iter()
                    .map(|t| {
                        std::iter::once(t.coef)
                            .chain(t.powers.iter().map(|&p| p as f64))
                            .collect()
                    })
                    .collect();
                write!(
                    f,
                    "conformal:{dim}:{}",
                    serde_json::to_string(&arr).unwrap_or_default()
                )
            }
        }
    }
}

impl FromStr for ManifoldSpec {
    type Err = Error;

    /// `euclidean:N`, `sphere:N[:R]`, `sphere-polar:N[:R]`, `hyperbolic:N`,
    /// `conformal:N:[[c,e1,..,eN],...]`, or a JSON object.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()));
        }
        let bad = || Error::Config(format!("cannot parse manifold `{s}`"));
        let mut parts = s.splitn(3, ':');
        let id = parts.next().ok_or_else(bad)?;
        let dim: usize = parts
            .next()
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        if dim < 2 {
            return Err(Error::Config(
                "manifold dimension must be at least 2".into(),
            ));
        }
        let rest = parts.next();
        let radius = || -> Result<f64> {
            match rest {
                None => Ok(1.0),
                Some(r) => r.trim().parse().map_err(|_| bad()),
            }
        };
        Ok(match id {
            "euclidean" | "flat" => ManifoldSpec::Euclidean { dim },
            "sphere" => ManifoldSpec::Sphere {
                dim,
                radius: radius()?,
                chart: SphereChart::Stereographic,
            },
            "sphere-polar" => ManifoldSpec::Sphere {
                dim,
                radius: radius()?,
                chart: SphereChart::Polar,
            },
            "hyperbolic" | "poincare" => ManifoldSpec::Hyperbolic { dim },
            "conformal" | "torus-conformal" => {
                let arr: Vec<Vec<f64>> = serde_json::from_str(rest.ok_or_else(bad)?)
                    .map_err(|e| Error::Config(format!("conformal coefficients: {e}")))?;
                let terms = arr
                    .into_iter()
                    .map(|row| {
                        if row.len() != dim + 1 {
                            return Err(Error::Config(format!(
                                "conformal term needs 1 + {dim} entries"
                            )));
                        }
                        let powers = row[1..]
                            .iter()
                            .map(|&p| {
                                if p >= 0.0 && p.fract() == 0.0 {
                                    Ok(p as u32)
                                } else {
                                    Err(Error::Config(format!("bad exponent {p}")))
                                }
                            })
                            .collect::<Result<_>>()?;
                        Ok(PolyTerm {
                            coef: row[0],
                            powers,
                        })
                    })
                    .collect::<Result<_>>()?;
                ManifoldSpec::Conformal { dim, terms }
            }
            _ => return Err(Error::Config(format!("unknown manifold `{id}`"))),
        })
    }
}

/// A Riemannian manifold given on a single chart.
#[derive(Clone)]
pub struct ChartManifold {
    pub id: String,
    dim: usize,
    domain: Domain,
    field: Arc<dyn MetricField>,
    constant_curvature: Option<f64>,
    step: StepStrategy,
}

impl fmt::Debug for ChartManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartManifold")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Stencil boundary margin, in stencil radii.
const MARGIN_RADII: f64 = 5.0;

impl ChartManifold {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        domain: Domain,
        field: impl MetricField + 'static,
    ) -> Self {
        ChartManifold {
            id: id.into(),
            dim,
            domain,
            field: Arc::new(field),
            constant_curvature: None,
            step: StepStrategy::Richardson { h: 1e-3 },
        }
    }

    /// A manifold whose metric is only known pointwise.
    pub fn from_metric_fn(
        id: impl Into<String>,
        dim: usize,
        domain: Domain,
        g: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        ChartManifold::new(id, dim, domain, NumericMetric { f: g })
    }

    pub fn euclidean(dim: usize) -> Self {
        ChartManifold::new(format!("euclidean:{dim}"), dim, Domain::Whole, Flat { dim })
            .with_constant_curvature(0.0)
    }

    pub fn sphere(dim: usize, radius: f64) -> Self {
        let id = ManifoldSpec::Sphere {
            dim,
            radius,
            chart: SphereChart::Stereographic,
        }
        .to_string();
        ChartManifold::new(
            id,
            dim,
            Domain::Whole,
            Conformal {
                dim,
                factor: Stereographic { radius },
            },
        )
        .with_constant_curvature(1.0 / (radius * radius))
    }

    pub fn sphere_polar(dim: usize, radius: f64) -> Self {
        let id = ManifoldSpec::Sphere {
            dim,
            radius,
            chart: SphereChart::Polar,
        }
        .to_string();
        let mut lo = vec![0.0; dim];
        let mut hi = vec![std::f64::consts::PI; dim];
        lo[dim - 1] = -std::f64::consts::PI;
        hi[dim - 1] = std::f64::consts::PI;
        ChartManifold::new(id, dim, Domain::Box { lo, hi }, PolarSphere { dim, radius })
            .with_constant_curvature(1.0 / (radius * radius))
    }

    pub fn hyperbolic(dim: usize) -> Self {
        ChartManifold::new(
            format!("hyperbolic:{dim}"),
            dim,
            Domain::Ball { radius: 1.0 },
            Conformal {
                dim,
                factor: PoincareBall,
            },
        )
        .with_constant_curvature(-1.0)
    }

    pub fn conformal(dim: usize, terms: Vec<PolyTerm>) -> Self {
        let id = ManifoldSpec::Conformal {
            dim,
            terms: terms.clone(),
        }
        .to_string();
        ChartManifold::new(
            id,
            dim,
            Domain::Whole,
            Conformal {
                dim,
                factor: Polynomial { terms },
            },
        )
    }

    pub fn from_spec(spec: &ManifoldSpec) -> Result<Self> {
        let dim = match spec {
            ManifoldSpec::Euclidean { dim }
            | ManifoldSpec::Sphere { dim, .. }
            | ManifoldSpec::Hyperbolic { dim }
            | ManifoldSpec::Conformal { dim, .. } => *dim,
        };
        if dim < 2 {
            return Err(Error::Config(
                "manifold dimension must be at least 2".into(),
            ));
        }
        Ok(match spec {
            ManifoldSpec::Euclidean { dim } => ChartManifold::euclidean(*dim),
            ManifoldSpec::Sphere { dim, radius, chart } => {
                if *radius <= 0.0 {
                    return Err(Error::Config("sphere radius must be positive".into()));
                }
                match chart {
                    SphereChart::Stereographic => ChartManifold::sphere(*dim, *radius),
                    SphereChart::Polar => ChartManifold::sphere_polar(*dim, *radius),
                }
            }
            ManifoldSpec::Hyperbolic { dim } => ChartManifold::hyperbolic(*dim),
            ManifoldSpec::Conformal { dim, terms } => {
                if terms.iter().any(|t| t.powers.len() != *dim) {
                    return Err(Error::Config("conformal term arity mismatch".into()));
                }
                ChartManifold::conformal(*dim, terms.clone())
            }
        })
    }

    pub fn with_constant_curvature(mut self, k0: f64) -> Self {
        self.constant_curvature = Some(k0);
        self
    }

    pub fn with_step(mut self, step: StepStrategy) -> Self {
        self.step = step;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn step(&self) -> StepStrategy {
        self.step
    }

    /// Known constant sectional curvature of catalog space forms.
    pub fn constant_curvature(&self) -> Option<f64> {
        self.constant_curvature
    }

    pub fn has_analytic_christoffels(&self) -> bool {
        self.field.christoffels(&vec![0.0; self.dim]).is_some()
    }

    /// Number of nested difference levels needed for Christoffel symbols.
    pub fn christoffel_levels(&self) -> usize {
        usize::from(!self.has_analytic_christoffels())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DegenerateInput(format!(
                "point has {} coordinates, manifold has dimension {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Fails unless a stencil with `levels` nested layers fits inside the
    /// chart with the boundary margin.
    pub fn require_interior(&self, x: &[f64], levels: usize) -> Result<()> {
        self.check_dim(x)?;
        let radius = levels as f64 * self.step.max_radius(x);
        let need = if levels == 0 {
            0.0
        } else {
            MARGIN_RADII * radius
        };
        if self.domain.clearance(x) <= need {
            return Err(Error::StencilOutOfDomain {
                at: x.to_vec(),
                radius,
            });
        }
        Ok(())
    }

    /// Metric components, checked to be symmetric positive definite.
    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let g = self.field.metric(x);
        if g.iter().any(|v| !v.is_finite()) || g.clone().cholesky().is_none() {
            return Err(Error::SingularMetric { at: x.to_vec() });
        }
        Ok(g)
    }

    fn inverse_metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric(x)?;
        g.cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::SingularMetric { at: x.to_vec() })
    }

    /// `Gamma^a_bc` as `[a][b][c]`.
    pub fn christoffels(&self, x: &[f64]) -> Result<Tensor> {
        self.require_interior(x, self.christoffel_levels())?;
        self.christoffels_unchecked(x)
    }

    fn christoffels_unchecked(&self, x: &[f64]) -> Result<Tensor> {
        self.check_dim(x)?;
        if let Some(g) = self.field.christoffels(x) {
            if g.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularMetric { at: x.to_vec() });
            }
            return Ok(g);
        }
        let n = self.dim;
        let ginv = self.inverse_metric(x)?;
        let dg = numdiff::gradient(|y| Ok(self.metric(y)?.as_slice().to_vec()), x, self.step)?;
        // column-major: g[(a,b)] at a + n b
        let d = |c: usize, a: usize, b: usize| dg[c][a + n * b];
        Ok(Tensor::from_fn(n, 3, |i| {
            let (a, b, c) = (i[0], i[1], i[2]);
            0.5 * (0..n)
                .map(|e| ginv[(a, e)] * (d(b, e, c) + d(c, b, e) - d(e, b, c)))
                .sum::<f64>()
        }))
    }

    /// Lowered curvature `R_abcd = g(R(∂_a,∂_b)∂_c, ∂_d)`.
    pub fn riemann(&self, x: &[f64]) -> Result<Tensor> {
        self.require_interior(x, self.christoffel_levels() + 1)?;
        self.riemann_unchecked(x)
    }

    fn riemann_unchecked(&self, x: &[f64]) -> Result<Tensor> {
        let n = self.dim;
        let g = self.metric(x)?;
        let gam = self.christoffels_unchecked(x)?;
        let dgam = numdiff::gradient(
            |y| Ok(self.christoffels_unchecked(y)?.into_vec()),
            x,
            self.step,
        )?;
        let dgam = |p: usize, a: usize, b: usize, c: usize| dgam[p][(a * n + b) * n + c];
        // mixed[e][c][a][b] = R^e_{c a b}, R(∂_a,∂_b)∂_c = R^e_{cab} ∂_e
        let mixed = Tensor::from_fn(n, 4, |i| {
            let (e, c, a, b) = (i[0], i[1], i[2], i[3]);
            let mut v = dgam(a, e, b, c) - dgam(b, e, a, c);
            for f in 0..n {
                v += gam.at3(e, a, f) * gam.at3(f, b, c) - gam.at3(e, b, f) * gam.at3(f, a, c);
            }
            v
        });
        Ok(Tensor::from_fn(n, 4, |i| {
            let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
            (0..n).map(|e| g[(d, e)] * mixed.at4(e, c, a, b)).sum()
        }))
    }

    /// `(∇_p R)_abcd` as `[p][a][b][c][d]`.
    pub fn nabla_riemann(&self, x: &[f64]) -> Result<Tensor> {
        self.require_interior(x, self.christoffel_levels() + 2)?;
        let n = self.dim;
        let r = self.riemann_unchecked(x)?;
        let gam = self.christoffels_unchecked(x)?;
        let dr = numdiff::gradient(|y| Ok(self.riemann_unchecked(y)?.into_vec()), x, self.step)?;
        Ok(Tensor::from_fn(n, 5, |i| {
            let (p, a, b, c, d) = (i[0], i[1], i[2], i[3], i[4]);
            let mut v = dr[p][((a * n + b) * n + c) * n + d];
            for e in 0..n {
                v -= gam.at3(e, p, a) * r.at4(e, b, c, d)
                    + gam.at3(e, p, b) * r.at4(a, e, c, d)
                    + gam.at3(e, p, c) * r.at4(a, b, e, d)
                    + gam.at3(e, p, d) * r.at4(a, b, c, e);
            }
            v
        }))
    }

    /// Squared norm `g_q(v, v)`.
    pub fn norm_sq(&self, q: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.metric(q)?;
        Ok(inner(&g, v, v))
    }

    /// Orthonormal frame at `q` with `u_1 = v / |v|` (chart basis
    /// Gram-Schmidt when `v = 0`).
    pub fn adapted_frame(&self, q: &[f64], v: &[f64]) -> Result<AdaptedFramePoint> {
        self.check_dim(q)?;
        self.check_dim(v)?;
        let n = self.dim;
        let g = self.metric(q)?;
        let t = inner(&g, v, v).sqrt();
        let mut u: Vec<Vec<f64>> = Vec::with_capacity(n);
        if t > 0.0 {
            u.push(v.iter().map(|x| x / t).collect());
        }
        for k in 0..n {
            if u.len() == n {
                break;
            }
            let mut w: Vec<f64> = (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
            let w0 = inner(&g, &w, &w).sqrt();
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for e in &u {
                    let c = inner(&g, &w, e);
                    w.iter_mut().zip(e).for_each(|(wi, ei)| *wi -= c * ei);
                }
            }
            let nw = inner(&g, &w, &w).sqrt();
            if nw > 1e-6 * w0 {
                u.push(w.iter().map(|x| x / nw).collect());
            }
        }
        if u.len() != n {
            return Err(Error::DegenerateInput("chart basis does not span".into()));
        }
        Ok(AdaptedFramePoint {
            q: q.to_vec(),
            u,
            v: v.to_vec(),
            t,
        })
    }

    /// Curvature (and optionally `∇R`) expressed in the frame of `fp`.
    pub fn frame_curvature(
        &self,
        fp: &AdaptedFramePoint,
        with_nabla: bool,
    ) -> Result<FrameCurvature> {
        let r = self.riemann(&fp.q)?.in_frame(&fp.u);
        let dr = if with_nabla {
            Some(self.nabla_riemann(&fp.q)?.in_frame(&fp.u))
        } else {
            None
        };
        Ok(FrameCurvature { r, dr })
    }

    /// Sectional, Ricci and scalar curvature in the frame of `fp`.
    pub fn base_invariants(&self, fp: &AdaptedFramePoint) -> Result<BaseInvariants> {
        Ok(self.frame_curvature(fp, false)?.invariants())
    }

    /// Integrates the geodesic from `q` with initial velocity `dir` for
    /// parameter length `s`, parallel-transporting `frame` along it (RK4).
    pub fn transport_along_geodesic(
        &self,
        q: &[f64],
        dir: &[f64],
        frame: &[Vec<f64>],
        s: f64,
        steps: usize,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.dim;
        let m = frame.len();
        // state: x, xdot, frame vectors
        let mut state: Vec<f64> = q.iter().chain(dir).copied().collect();
        for f in frame {
            state.extend_from_slice(f);
        }
        let rhs = |y: &[f64]| -> Result<Vec<f64>> {
            let x = &y[..n];
            let xd = &y[n..2 * n];
            let gam = self.christoffels_unchecked(x)?;
            let mut out = vec![0.0; y.len()];
            out[..n].copy_from_slice(xd);
            for a in 0..n {
                let mut acc = 0.0;
                for b in 0..n {
                    for c in 0..n {
                        acc += gam.at3(a, b, c) * xd[b] * xd[c];
                    }
                }
                out[n + a] = -acc;
            }
            for k in 0..m {
                let e = &y[2 * n + k * n..2 * n + (k + 1) * n];
                for a in 0..n {
                    let mut acc = 0.0;
                    for b in 0..n {
                        for c in 0..n {
                            acc += gam.at3(a, b, c) * xd[b] * e[c];
                        }
                    }
                    out[2 * n + k * n + a] = -acc;
                }
            }
            Ok(out)
        };
        let h = s / steps as f64;
        for _ in 0..steps {
            let k1 = rhs(&state)?;
            let y2: Vec<f64> = state
                .iter()
                .zip(&k1)
                .map(|(y, k)| y + 0.5 * h * k)
                .collect();
            let k2 = rhs(&y2)?;
            let y3: Vec<f64> = state
                .iter()
                .zip(&k2)
                .map(|(y, k)| y + 0.5 * h * k)
                .collect();
            let k3 = rhs(&y3)?;
            let y4: Vec<f64> = state.iter().zip(&k3).map(|(y, k)| y + h * k).collect();
            let k4 = rhs(&y4)?;
            for i in 0..state.len() {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let x = state[..n].to_vec();
        let fr = (0..m)
            .map(|k| state[2 * n + k * n..2 * n + (k + 1) * n].to_vec())
            .collect();
        Ok((x, fr))
    }
}

pub(crate) fn inner(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[(i, j)] * a[i] * b[j];
        }
    }
    s
}

/// Base point with an orthonormal frame whose first vector is aligned with `v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptedFramePoint {
    pub q: Vec<f64>,
    /// `u[i]` holds the chart components of frame vector `u_{i+1}`.
    pub u: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    /// `|v|_g`.
    pub t: f64,
}

impl AdaptedFramePoint {
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Replaces `u_2..u_n` by `sum_j rot[i][j] u_{j+2}`; `rot` must be orthogonal.
    pub fn rotate_completion(&self, rot: &DMatrix<f64>) -> AdaptedFramePoint {
        let n = self.dim();
        assert_eq!(rot.nrows(), n - 1);
        let mut u = self.u.clone();
        for i in 1..n {
            u[i] = (0..n)
                .map(|a| (1..n).map(|j| rot[(i - 1, j - 1)] * self.u[j][a]).sum())
                .collect();
        }
        AdaptedFramePoint { u, ..self.clone() }
    }

    /// Gram matrix `g(u_i, u_j)`.
    pub fn gram(&self, m: &ChartManifold) -> Result<DMatrix<f64>> {
        let g = m.metric(&self.q)?;
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            inner(&g, &self.u[i], &self.u[j])
        }))
    }
}

/// Curvature in an orthonormal frame: `r[i][j][l][m] = g(R(u_i,u_j)u_l,u_m)` and
/// `dr[p][i][j][l][m] = g((∇_{u_p}R)(u_i,u_j)u_l,u_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCurvature {
    pub r: Tensor,
    pub dr: Option<Tensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseInvariants {
    /// `K(u_i,u_j)`, zero on the diagonal.
    pub sectional: Vec<Vec<f64>>,
    pub ricci: Vec<Vec<f64>>,
    pub scalar: f64,
}

impl FrameCurvature {
    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    pub fn invariants(&self) -> BaseInvariants {
        let n = self.dim();
        let r = &self.r;
        let sectional = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 0.0 } else { r.at4(i, j, j, i) })
                    .collect()
            })
            .collect();
        let ricci: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|l| r.at4(i, l, l, j)).sum())
                    .collect()
            })
            .collect();
        let scalar = (0..n).map(|i| ricci[i][i]).sum();
        BaseInvariants {
            sectional,
            ricci,
            scalar,
        }
    }

    /// Largest violation of the algebraic curvature symmetries and both
    /// Bianchi identities.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.dim();
        let r = &self.r;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        let v = r.at4(i, j, l, m);
                        worst = worst
                            .max((v + r.at4(j, i, l, m)).abs())
                            .max((v + r.at4(i, j, m, l)).abs())
                            .max((v - r.at4(l, m, i, j)).abs())
                            .max((v + r.at4(j, l, i, m) + r.at4(l, i, j, m)).abs());
                        if let Some(dr) = &self.dr {
                            for p in 0..n {
                                let cyc = dr.at5(p, i, j, l, m)
                                    + dr.at5(i, j, p, l, m)
                                    + dr.at5(j, p, i, l, m);
                                worst = worst.max(cyc.abs());
                            }
                        }
                    }
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn euclidean_is_flat() {
        let m = ChartManifold::euclidean(3);
        let x = [0.3, -1.0, 2.0];
        assert_eq!(m.christoffels(&x).unwrap().max_abs(), 0.0);
        assert_eq!(m.riemann(&x).unwrap().max_abs(), 0.0);
        assert_eq!(m.nabla_riemann(&x).unwrap().max_abs(), 0.0);
        let fp = m.adapted_frame(&x, &[0.0, 0.0, 0.0]).unwrap();
        let inv = m.base_invariants(&fp).unwrap();
        assert_eq!(inv.scalar, 0.0);
    }

    #[test]
    fn polar_sphere_christoffels() {
        let m = ChartManifold::sphere_polar(2, 1.0);
        let theta: f64 = 0.9;
        let g = m.christoffels(&[theta, 0.2]).unwrap();
        assert!((g.at3(0, 1, 1) + theta.sin() * theta.cos()).abs() < 1e-15);
        assert!((g.at3(1, 0, 1) - theta.cos() / theta.sin()).abs() < 1e-15);
        // the finite-difference route agrees
        let num = ChartManifold::from_metric_fn("polar-numeric", 2, Domain::Whole, |x| {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, x[0].sin().powi(2)]))
        });
        let gn = num.christoffels(&[theta, 0.2]).unwrap();
        for (a, b) in g.as_slice().iter().zip(gn.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn poincare_christoffels_vanish_at_origin() {
        let m = ChartManifold::hyperbolic(2);
        assert_eq!(m.christoffels(&[0.0, 0.0]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn unit_sphere_curvature_is_one() {
        for m in [
            ChartManifold::sphere(2, 1.0),
            ChartManifold::sphere_polar(2, 1.0),
        ] {
            let q = [0.7, 0.4];
            let fp = m.adapted_frame(&q, &[1.0, 0.3]).unwrap();
            let fc = m.frame_curvature(&fp, true).unwrap();
            assert!(
                (fc.r.at4(0, 1, 1, 0) - 1.0).abs() < 1e-9,
                "{}",
                fc.r.at4(0, 1, 1, 0)
            );
            assert!(fc.dr.as_ref().unwrap().max_abs() < 1e-6);
            assert!(fc.symmetry_residual() < 1e-6);
            let inv = fc.invariants();
            assert!((inv.scalar - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn s3_scalar_is_six_and_poincare_is_minus_one() {
        let s3 = ChartManifold::sphere(3, 1.0);
        let fp = s3
            .adapted_frame(&[0.2, -0.1, 0.4], &[0.0, 1.0, 0.0])
            .unwrap();
        assert!((s3.base_invariants(&fp).unwrap().scalar - 6.0).abs() < 1e-8);
        let s3p = ChartManifold::sphere_polar(3, 1.0);
        let fp = s3p
            .adapted_frame(&[1.1, 0.8, 0.3], &[0.3, 0.0, 1.0])
            .unwrap();
        assert!((s3p.base_invariants(&fp).unwrap().scalar - 6.0).abs() < 1e-8);

        let h = ChartManifold::hyperbolic(2);
        for q in [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.1]] {
            let fp = h.adapted_frame(&q, &[0.0, 0.0]).unwrap();
            let k = h.base_invariants(&fp).unwrap().sectional[0][1];
            assert!((k + 1.0).abs() < 1e-8, "{k}");
        }
        let r2 = ChartManifold::sphere(2, 2.0);
        let fp = r2.adapted_frame(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((r2.base_invariants(&fp).unwrap().sectional[0][1] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn adapted_frame_examples() {
        let e = ChartManifold::euclidean(2);
        let fp = e.adapted_frame(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
        assert_eq!(fp.u, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(fp.t, 2.0);

        let s = ChartManifold::sphere_polar(2, 1.0);
        let fp = s.adapted_frame(&[FRAC_PI_4, 0.0], &[0.0, 1.0]).unwrap();
        assert!((fp.t - FRAC_PI_4.sin()).abs() < 1e-15);

        let h = ChartManifold::hyperbolic(3);
        let fp = h
            .adapted_frame(&[0.1, 0.2, -0.3], &[0.4, -1.0, 0.2])
            .unwrap();
        let gram = fp.gram(&h).unwrap();
        assert!((gram - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        let t = fp.t;
        assert!(fp.u[0].iter().zip(&fp.v).all(|(u, v)| *u == v / t));
    }

    #[test]
    fn stencil_margin_enforced() {
        let h = ChartManifold::hyperbolic(2);
        assert!(matches!(
            h.riemann(&[0.999, 0.0]),
            Err(Error::StencilOutOfDomain { .. })
        ));
        let p = ChartManifold::sphere_polar(2, 1.0);
        assert!(matches!(
            p.riemann(&[0.001, 0.0]),
            Err(Error::StencilOutOfDomain { .. })
        ));
        assert!(p.riemann(&[PI / 2.0, 0.0]).is_ok());
    }

    #[test]
    fn singular_metric_reported() {
        let m = ChartManifold::from_metric_fn("degenerate", 2, Domain::Whole, |x| {
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, x[0]]))
        });
        assert!(matches!(
            m.metric(&[-1.0, 0.0]),
            Err(Error::SingularMetric { .. })
        ));
    }

    fn bumpy() -> ChartManifold {
        "conformal:3:[[0.1,1,1,0],[0.05,0,2,1],[-0.07,1,0,0]]"
            .parse::<ManifoldSpec>()
            .unwrap()
            .build()
            .unwrap()
    }

    #[test]
    fn conformal_curvature_symmetries() {
        let m = bumpy();
        let fp = m
            .adapted_frame(&[0.3, -0.4, 0.5], &[0.2, 1.0, -0.3])
            .unwrap();
        let fc = m.frame_curvature(&fp, true).unwrap();
        assert!(fc.r.max_abs() > 1e-2);
        assert!(fc.dr.as_ref().unwrap().max_abs() > 1e-3);
        assert!(fc.symmetry_residual() < 1e-7, "{}", fc.symmetry_residual());
    }

    #[test]
    fn completion_rotation_keeps_invariants() {
        let m = bumpy();
        let fp = m
            .adapted_frame(&[0.1, 0.2, -0.3], &[1.0, 0.5, 0.0])
            .unwrap();
        let a = m.base_invariants(&fp).unwrap();
        let th: f64 = 0.77;
        let rot = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let rp = fp.rotate_completion(&rot);
        assert!((rp.gram(&m).unwrap() - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        let b = m.base_invariants(&rp).unwrap();
        assert!((a.scalar - b.scalar).abs() < 1e-8);
        assert!((a.ricci[0][0] - b.ricci[0][0]).abs() < 1e-8);
        // K(u1, .) summed over the completion is the rotation-invariant part
        let ta: f64 = a.sectional[0].iter().sum();
        let tb: f64 = b.sectional[0].iter().sum();
        assert!((ta - tb).abs() < 1e-8);
    }

    #[test]
    fn harmonic_conformal_factor_is_flat_in_two_dimensions() {
        let m: ChartManifold = "conformal:2:[[0.1,1,1]]"
            .parse::<ManifoldSpec>()
            .unwrap()
            .build()
            .unwrap();
        assert!(m.riemann(&[0.4, -0.3]).unwrap().max_abs() < 1e-9);
    }

    // (∇_{u_p}R)(u_i,u_j,u_l,u_m) against d/ds R(E_i,E_j,E_l,E_m) along the
    // geodesic through q with velocity u_p and parallel frame E.
    #[test]
    fn nabla_riemann_matches_parallel_transport() {
        // in two dimensions e^{2f}δ with harmonic f is flat, so use three
        let m = ChartManifold::conformal(
            3,
            vec![PolyTerm {
                coef: 0.1,
                powers: vec![1, 1, 0],
            }],
        );
        let q = [0.4, -0.3, 0.2];
        let fp = m.adapted_frame(&q, &[1.0, 0.2, 0.0]).unwrap();
        let dr = m.frame_curvature(&fp, true).unwrap().dr.unwrap();
        assert!(dr.max_abs() > 1e-4);
        let h = 1e-2;
        for p in 0..3 {
            let along = |s: f64| {
                let (x, e) = m
                    .transport_along_geodesic(&q, &fp.u[p], &fp.u, s, 40)
                    .unwrap();
                m.riemann(&x).unwrap().in_frame(&e)
            };
            let (fwd, bwd) = (along(h), along(-h));
            let (fwd2, bwd2) = (along(2.0 * h), along(-2.0 * h));
            for i in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        for k in 0..3 {
                            let d = (8.0 * (fwd.at4(i, j, l, k) - bwd.at4(i, j, l, k))
                                - (fwd2.at4(i, j, l, k) - bwd2.at4(i, j, l, k)))
                                / (12.0 * h);
                            let e = dr.at5(p, i, j, l, k);
                            assert!((d - e).abs() < 1e-6, "p={p} {i}{j}{l}{k}: {d} vs {e}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn spec_parsing() {
        let s: ManifoldSpec = "sphere:3".parse().unwrap();
        assert_eq!(
            s,
            ManifoldSpec::Sphere {
                dim: 3,
                radius: 1.0,
                chart: SphereChart::Stereographic
            }
        );
        let c: ManifoldSpec = "conformal:2:[[0.1,1,1]]".parse().unwrap();
        assert_eq!(c.to_string(), "conformal:2:[[0.1,1.0,1.0]]");
        let back: ManifoldSpec = c.to_string().parse().unwrap();
        assert_eq!(back, c);
        let j: ManifoldSpec =
            r#"{"id":"torus-conformal","dim":2,"terms":[{"coef":0.1,"powers":[1,1]}]}"#
                .parse()
                .unwrap();
        assert_eq!(j, c);
        assert!("sphere:1".parse::<ManifoldSpec>().is_err());
        assert!("klein:2".parse::<ManifoldSpec>().is_err());
        assert!("conformal:2:[[0.1,1]]".parse::<ManifoldSpec>().is_err());
    }
}
