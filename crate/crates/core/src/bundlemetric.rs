//! The natural metric on `TM` in induced coordinates `(x, v)` and the
//! adapted frame expressed in that chart.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::basemanifold::{inner, AdaptedFramePoint, ChartManifold};
use crate::error::{Error, Result};
use crate::metricfamily::{FiberArg, NaturalMetricFamily};
use crate::tensor::Tensor;

/// A point of `TM` in induced coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundlePoint {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl BundlePoint {
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Self {
        BundlePoint { x, v }
    }

    /// Splits a `2n` coordinate vector `(x, v)`.
    pub fn from_coords(y: &[f64]) -> Self {
        let n = y.len() / 2;
        BundlePoint {
            x: y[..n].to_vec(),
            v: y[n..].to_vec(),
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        self.x.iter().chain(&self.v).copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// `G` over the induced basis `(∂/∂x^1..∂/∂x^n, ∂/∂v^1..∂/∂v^n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleMetricAtPoint {
    pub g: DMatrix<f64>,
}

/// `(Γv)^a_c = Γ^a_{bc} v^b`, the matrix of `A_x ↦ Γ(v, A_x)`.
fn gamma_v(gam: &Tensor, v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    DMatrix::from_fn(n, n, |a, c| (0..n).map(|b| gam.at3(a, b, c) * v[b]).sum())
}

fn check_point(m: &ChartManifold, p: &BundlePoint) -> Result<()> {
    if p.x.len() != m.dim() || p.v.len() != m.dim() {
        return Err(Error::DegenerateInput(format!(
            "bundle point needs {} + {} coordinates",
            m.dim(),
            m.dim()
        )));
    }
    Ok(())
}

/// `(π_* A, K A)` for a tangent vector `A` of `TM` at `p`.
pub fn connection_split(
    m: &ChartManifold,
    p: &BundlePoint,
    a: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_point(m, p)?;
    let n = m.dim();
    if a.len() != 2 * n {
        return Err(Error::DegenerateInput(
            "tangent vector needs 2n entries".into(),
        ));
    }
    let gv = gamma_v(&m.christoffels(&p.x)?, &p.v);
    let hor = a[..n].to_vec();
    let ver = (0..n)
        .map(|i| a[n + i] + (0..n).map(|c| gv[(i, c)] * a[c]).sum::<f64>())
        .collect();
    Ok((hor, ver))
}

/// `G(A,B) = g(π_*A, π_*B) + α g(KA, KB) + β g(KA, v) g(KB, v)` with `α, β`
/// evaluated at `|v|^2`.
pub fn induced_metric(
    m: &ChartManifold,
    fam: &NaturalMetricFamily,
    p: &BundlePoint,
) -> Result<BundleMetricAtPoint> {
    check_point(m, p)?;
    let n = m.dim();
    let g = m.metric(&p.x)?;
    let (alpha, beta) = fam.coefficients(FiberArg::from_sq(inner(&g, &p.v, &p.v)))?;
    let gvec = &g * nalgebra::DVector::from_column_slice(&p.v);
    let fiber = &g * alpha + &gvec * gvec.transpose() * beta;
    // K = [Γv | I] as an n x 2n matrix; π_* = [I | 0]
    let gv = gamma_v(&m.christoffels(&p.x)?, &p.v);
    let mut k = DMatrix::zeros(n, 2 * n);
    k.view_mut((0, 0), (n, n)).copy_from(&gv);
    k.view_mut((0, n), (n, n)).fill_with_identity();
    let mut out = k.transpose() * fiber * &k;
    let mut top = out.view_mut((0, 0), (n, n));
    top += &g;
    // symmetrize away rounding
    let sym = (&out + out.transpose()) * 0.5;
    if sym.clone().cholesky().is_none() {
        return Err(Error::SingularMetric { at: p.coords() });
    }
    Ok(BundleMetricAtPoint { g: sym })
}

impl BundleMetricAtPoint {
    pub fn apply(&self, a: &[f64], b: &[f64]) -> f64 {
        inner(&self.g, a, b)
    }
}

/// The adapted frame `e_1..e_{2n}` in induced coordinates: `e_i` is the
/// horizontal lift of `u_i` and `e_{n+i}` its vertical lift.
pub fn adapted_frame_vectors(m: &ChartManifold, fp: &AdaptedFramePoint) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    let gv = gamma_v(&m.christoffels(&fp.q)?, &fp.v);
    let mut out = Vec::with_capacity(2 * n);
    for u in &fp.u {
        let mut e = u.clone();
        e.extend((0..n).map(|a| -(0..n).map(|c| gv[(a, c)] * u[c]).sum::<f64>()));
        out.push(e);
    }
    for u in &fp.u {
        let mut e = vec![0.0; n];
        e.extend_from_slice(u);
        out.push(e);
    }
    Ok(out)
}
