//! Central-difference stencils for vector-valued functions of several
//! variables, with optional Richardson extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// How the finite-difference step is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepStrategy {
    /// Plain second-order central differences with a fixed step.
    Fixed { h: f64 },
    /// Plain central differences, `h = eps^(1/3) * max(1, |x_i|)` per axis.
    Scaled,
    /// Central differences at `h` and `h/2` combined into a fourth-order estimate.
    Richardson { h: f64 },
}

impl Default for StepStrategy {
    fn default() -> Self {
        StepStrategy::Richardson { h: 1e-3 }
    }
}

impl StepStrategy {
    /// Largest distance from `x` the stencil may reach along axis `axis`.
    pub fn radius(&self, x: &[f64], axis: usize) -> f64 {
        self.step(x, axis)
    }

    /// Largest stencil radius over all axes.
    pub fn max_radius(&self, x: &[f64]) -> f64 {
        (0..x.len()).map(|k| self.radius(x, k)).fold(0.0, f64::max)
    }

    fn step(&self, x: &[f64], axis: usize) -> f64 {
        match *self {
            StepStrategy::Fixed { h } | StepStrategy::Richardson { h } => h,
            StepStrategy::Scaled => f64::EPSILON.cbrt() * x[axis].abs().max(1.0),
        }
    }

    fn extrapolates(&self) -> bool {
        matches!(self, StepStrategy::Richardson { .. })
    }
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(k, d) in moves {
        y[k] += d;
    }
    y
}

fn axpy(acc: &mut [f64], a: f64, v: &[f64]) {
    for (o, x) in acc.iter_mut().zip(v) {
        *o += a * x;
    }
}

fn richardson(coarse: Vec<f64>, fine: Vec<f64>) -> Vec<f64> {
    coarse
        .into_iter()
        .zip(fine)
        .map(|(c, f)| (4.0 * f - c) / 3.0)
        .collect()
}

fn central_first<F>(f: &F, x: &[f64], k: usize, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let plus = f(&shifted(x, &[(k, h)]))?;
    let minus = f(&shifted(x, &[(k, -h)]))?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect())
}

/// Partial derivatives `df/dx_k` for every axis `k`; result is indexed `[k][component]`.
pub fn gradient<F>(f: F, x: &[f64], strategy: StepStrategy) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    (0..x.len())
        .map(|k| {
            let h = strategy.step(x, k);
            let coarse = central_first(&f, x, k, h)?;
            if strategy.extrapolates() {
                let fine = central_first(&f, x, k, h / 2.0)?;
                Ok(richardson(coarse, fine))
            } else {
                Ok(coarse)
            }
        })
        .collect()
}

fn central_second<F>(
    f: &F,
    x: &[f64],
    center: &[f64],
    k: usize,
    l: usize,
    hk: f64,
    hl: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if k == l {
        let plus = f(&shifted(x, &[(k, hk)]))?;
        let minus = f(&shifted(x, &[(k, -hk)]))?;
        let mut out = vec![0.0; center.len()];
        axpy(&mut out, 1.0, &plus);
        axpy(&mut out, 1.0, &minus);
        axpy(&mut out, -2.0, center);
        out.iter_mut().for_each(|o| *o /= hk * hk);
        Ok(out)
    } else {
        let pp = f(&shifted(x, &[(k, hk), (l, hl)]))?;
        let pm = f(&shifted(x, &[(k, hk), (l, -hl)]))?;
        let mp = f(&shifted(x, &[(k, -hk), (l, hl)]))?;
        let mm = f(&shifted(x, &[(k, -hk), (l, -hl)]))?;
        let mut out = vec![0.0; center.len()];
        axpy(&mut out, 1.0, &pp);
        axpy(&mut out, -1.0, &pm);
        axpy(&mut out, -1.0, &mp);
        axpy(&mut out, 1.0, &mm);
        out.iter_mut().for_each(|o| *o /= 4.0 * hk * hl);
        Ok(out)
    }
}

/// Value, gradient `[k][c]` and Hessian `[k][l][c]` of a vector-valued function.
pub struct SecondOrder {
    pub value: Vec<f64>,
    pub gradient: Vec<Vec<f64>>,
    pub hessian: Vec<Vec<Vec<f64>>>,
}

pub fn second_order<F>(f: F, x: &[f64], strategy: StepStrategy) -> Result<SecondOrder>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let value = f(x)?;
    let gradient = gradient(&f, x, strategy)?;
    let dim = x.len();
    let mut hessian = vec![vec![Vec::new(); dim]; dim];
    for k in 0..dim {
        for l in k..dim {
            let (hk, hl) = (strategy.step(x, k), strategy.step(x, l));
            let coarse = central_second(&f, x, &value, k, l, hk, hl)?;
            let d = if strategy.extrapolates() {
                let fine = central_second(&f, x, &value, k, l, hk / 2.0, hl / 2.0)?;
                richardson(coarse, fine)
            } else {
                coarse
            };
            hessian[l][k] = d.clone();
            hessian[k][l] = d;
        }
    }
    Ok(SecondOrder {
        value,
        gradient,
        hessian,
    })
}
