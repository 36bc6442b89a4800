//! Truncated Taylor series in one variable.
//!
//! A [`Taylor`] of order `k` stores `c[j] = f^(j)(t) / j!` for `j = 0..=k`.
//! All operations propagate the coefficients exactly (up to rounding) using
//! the standard recurrences, so derivatives are never obtained by differencing.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct Taylor {
    c: Vec<f64>,
}

impl Taylor {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        Taylor { c }
    }

    /// The independent variable expanded at `t`.
    pub fn variable(t: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = t;
        if order >= 1 {
            c[1] = 1.0;
        }
        Taylor { c }
    }

    pub fn from_coefficients(c: Vec<f64>) -> Self {
        assert!(
            !c.is_empty(),
            "a Taylor series needs at least one coefficient"
        );
        Taylor { c }
    }

    /// Builds a series from derivative values `[f, f', f'', ...]`.
    pub fn from_derivatives(d: &[f64]) -> Self {
        let mut fact = 1.0;
        let c = d
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if j > 0 {
                    fact *= j as f64;
                }
                v / fact
            })
            .collect();
        Taylor::from_coefficients(c)
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// `j`-th derivative, zero beyond the truncation order.
    pub fn derivative(&self, j: usize) -> f64 {
        let fact: f64 = (1..=j).map(|k| k as f64).product();
        self.c.get(j).map_or(0.0, |c| c * fact)
    }

    /// Series of the derivative; loses one order.
    pub fn differentiate(&self) -> Taylor {
        if self.c.len() == 1 {
            return Taylor::constant(0.0, 0);
        }
        let c = (1..self.c.len()).map(|j| j as f64 * self.c[j]).collect();
        Taylor { c }
    }

    pub fn truncate(mut self, order: usize) -> Taylor {
        self.c.truncate(order + 1);
        self
    }

    fn common_order(&self, other: &Taylor) -> usize {
        self.order().min(other.order())
    }

    pub fn scale(&self, s: f64) -> Taylor {
        Taylor {
            c: self.c.iter().map(|x| s * x).collect(),
        }
    }

    pub fn exp(&self) -> Taylor {
        let k = self.order();
        let mut e = vec![0.0; k + 1];
        e[0] = self.c[0].exp();
        for m in 1..=k {
            let s: f64 = (1..=m).map(|j| j as f64 * self.c[j] * e[m - j]).sum();
            e[m] = s / m as f64;
        }
        Taylor { c: e }
    }

    /// Natural logarithm; the caller guarantees a positive leading coefficient.
    pub fn ln(&self) -> Taylor {
        let k = self.order();
        let a0 = self.c[0];
        let mut l = vec![0.0; k + 1];
        l[0] = a0.ln();
        for m in 1..=k {
            let s: f64 = (1..m).map(|j| j as f64 * l[j] * self.c[m - j]).sum();
            l[m] = (self.c[m] - s / m as f64) / a0;
        }
        Taylor { c: l }
    }

    /// Real power with a positive leading coefficient.
    pub fn powf(&self, r: f64) -> Taylor {
        let k = self.order();
        let a0 = self.c[0];
        let mut p = vec![0.0; k + 1];
        p[0] = a0.powf(r);
        for m in 1..=k {
            let s: f64 = (1..=m)
                .map(|j| ((r + 1.0) * j as f64 - m as f64) * self.c[j] * p[m - j])
                .sum();
            p[m] = s / (m as f64 * a0);
        }
        Taylor { c: p }
    }

    /// Non-negative integer power by repeated squaring; valid for any base.
    pub fn powi(&self, n: u32) -> Taylor {
        let mut result = Taylor::constant(1.0, self.order());
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn recip(&self) -> Taylor {
        &Taylor::constant(1.0, self.order()) / self
    }
}

impl Add for &Taylor {
    type Output = Taylor;
    fn add(self, rhs: &Taylor) -> Taylor {
        let k = self.common_order(rhs);
        Taylor {
            c: (0..=k).map(|j| self.c[j] + rhs.c[j]).collect(),
        }
    }
}

impl Sub for &Taylor {
    type Output = Taylor;
    fn sub(self, rhs: &Taylor) -> Taylor {
        let k = self.common_order(rhs);
        Taylor {
            c: (0..=k).map(|j| self.c[j] - rhs.c[j]).collect(),
        }
    }
}

impl Mul for &Taylor {
    type Output = Taylor;
    fn mul(self, rhs: &Taylor) -> Taylor {
        let k = self.common_order(rhs);
        Taylor {
            c: (0..=k)
                .map(|m| (0..=m).map(|j| self.c[j] * rhs.c[m - j]).sum())
                .collect(),
        }
    }
}

impl Div for &Taylor {
    type Output = Taylor;
    fn div(self, rhs: &Taylor) -> Taylor {
        let k = self.common_order(rhs);
        let b0 = rhs.c[0];
        let mut q = vec![0.0; k + 1];
        for m in 0..=k {
            let s: f64 = (1..=m).map(|j| rhs.c[j] * q[m - j]).sum();
            q[m] = (self.c[m] - s) / b0;
        }
        Taylor { c: q }
    }
}

impl Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: Taylor) -> Taylor {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Taylor> for Taylor {
            type Output = Taylor;
            fn $m(self, rhs: &Taylor) -> Taylor {
                (&self).$m(rhs)
            }
        }
        impl $tr<Taylor> for &Taylor {
            type Output = Taylor;
            fn $m(self, rhs: Taylor) -> Taylor {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

/// Value and first two derivatives of a scalar function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub fn new(value: f64, d1: f64, d2: f64) -> Self {
        Jet2 { value, d1, d2 }
    }

    pub fn to_taylor(self) -> Taylor {
        Taylor::from_derivatives(&[self.value, self.d1, self.d2])
    }
}

impl From<&Taylor> for Jet2 {
    fn from(s: &Taylor) -> Self {
        Jet2 {
            value: s.derivative(0),
            d1: s.derivative(1),
            d2: s.derivative(2),
        }
    }
}

impl From<Taylor> for Jet2 {
    fn from(s: Taylor) -> Self {
        Jet2::from(&s)
    }
}
