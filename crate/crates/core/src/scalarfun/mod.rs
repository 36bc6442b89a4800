//! Univariate scalar functions of `t` with exact derivative jets.
//!
//! Functions are either parsed expressions, hand-written jets, or derived
//! functions (see [`crate::metricfamily::flatness_beta`]). Everything
//! evaluates to a truncated Taylor series so that derived quantities can
//! request exactly the derivative order they need.

mod ast;
mod jet;
mod parser;

use std::fmt;
use std::sync::Arc;

pub use ast::{ExprAst, Func, Rational};
pub use jet::{Jet2, Taylor};
pub use parser::parse;

use crate::error::{Error, Result};

/// Parses `src` into an expression tree.
pub fn parse_expr(src: &str) -> Result<ExprAst> {
    parse(src)
}

/// Exact `(f, f', f'')` of an expression at `t`.
pub fn eval_jet(f: &ExprAst, t: f64) -> Result<Jet2> {
    f.eval_taylor(t, 2).map(Jet2::from)
}

/// Anything that can produce a Taylor expansion of itself in one variable.
pub trait Univariate: Send + Sync {
    /// Taylor expansion at `t` up to `order`.
    fn taylor(&self, t: f64, order: usize) -> Result<Taylor>;
    fn describe(&self) -> String;
}

impl Univariate for ExprAst {
    fn taylor(&self, t: f64, order: usize) -> Result<Taylor> {
        self.eval_taylor(t, order)
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}

type JetFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// A function given by a closure returning `[f, f', ..., f^(k)]`.
struct HandJet {
    label: String,
    max_order: usize,
    derivs: Box<JetFn>,
}

impl Univariate for HandJet {
    fn taylor(&self, t: f64, order: usize) -> Result<Taylor> {
        if order > self.max_order {
            return Err(Error::Domain {
                node: format!(
                    "{} (jet supplied only to order {})",
                    self.label, self.max_order
                ),
                t,
            });
        }
        let d = (self.derivs)(t);
        if d.iter().take(order + 1).any(|x| !x.is_finite()) {
            return Err(Error::Domain {
                node: self.label.clone(),
                t,
            });
        }
        Ok(Taylor::from_derivatives(&d[..=order]))
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// Shared handle to a univariate function.
#[derive(Clone)]
pub struct ScalarFunction(Arc<dyn Univariate>);

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFunction({})", self.0.describe())
    }
}

impl fmt::Display for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.describe())
    }
}

impl ScalarFunction {
    pub fn new(f: impl Univariate + 'static) -> Self {
        ScalarFunction(Arc::new(f))
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(ScalarFunction::new(parse(src)?))
    }

    pub fn constant(c: f64) -> Self {
        ScalarFunction::new(ExprAst::Const(c))
    }

    /// Hand-written function: `derivs(t)` must return at least `max_order + 1`
    /// derivative values.
    pub fn from_derivatives(
        label: impl Into<String>,
        max_order: usize,
        derivs: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ScalarFunction::new(HandJet {
            label: label.into(),
            max_order,
            derivs: Box::new(derivs),
        })
    }

    pub fn taylor(&self, t: f64, order: usize) -> Result<Taylor> {
        self.0.taylor(t, order)
    }

    pub fn jet(&self, t: f64) -> Result<Jet2> {
        self.taylor(t, 2).map(Jet2::from)
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.taylor(t, 0).map(|s| s.value())
    }
}
