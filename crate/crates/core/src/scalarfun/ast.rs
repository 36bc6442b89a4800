use std::fmt;

use crate::error::{Error, Result};

use super::jet::Taylor;

/// Exponent of a power node, kept as a reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Some(Rational {
            num: s * num / g,
            den: s * den / g,
        })
    }

    pub fn integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.num < 0, self.den) {
            (false, 1) => write!(f, "{}", self.num),
            (true, 1) => write!(f, "({})", self.num),
            _ => write!(f, "({}/{})", self.num, self.den),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        match s {
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

/// Expression tree in the single variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Const(f64),
    Var,
    Neg(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    /// Partial: fails when the denominator vanishes.
    Div(Box<ExprAst>, Box<ExprAst>),
    /// Non-integer exponents require a positive base.
    Pow(Box<ExprAst>, Rational),
    /// `ln` and `sqrt` are partial.
    Call(Func, Box<ExprAst>),
}

impl ExprAst {
    /// Truncated Taylor expansion of the expression at `t`.
    pub fn eval_taylor(&self, t: f64, order: usize) -> Result<Taylor> {
        let fail = |node: &ExprAst| Error::Domain {
            node: node.to_string(),
            t,
        };
        Ok(match self {
            ExprAst::Const(c) => Taylor::constant(*c, order),
            ExprAst::Var => Taylor::variable(t, order),
            ExprAst::Neg(a) => -&a.eval_taylor(t, order)?,
            ExprAst::Add(a, b) => a.eval_taylor(t, order)? + b.eval_taylor(t, order)?,
            ExprAst::Sub(a, b) => a.eval_taylor(t, order)? - b.eval_taylor(t, order)?,
            ExprAst::Mul(a, b) => a.eval_taylor(t, order)? * b.eval_taylor(t, order)?,
            ExprAst::Div(a, b) => {
                let den = b.eval_taylor(t, order)?;
                if den.value() == 0.0 || !den.value().is_finite() {
                    return Err(fail(self));
                }
                a.eval_taylor(t, order)? / den
            }
            ExprAst::Pow(a, r) => {
                let base = a.eval_taylor(t, order)?;
                if r.is_integer() {
                    let n = r.num.unsigned_abs() as u32;
                    if r.num < 0 && base.value() == 0.0 {
                        return Err(fail(self));
                    }
                    let p = base.powi(n);
                    if r.num < 0 {
                        p.recip()
                    } else {
                        p
                    }
                } else {
                    if base.value() <= 0.0 {
                        return Err(fail(self));
                    }
                    base.powf(r.to_f64())
                }
            }
            ExprAst::Call(func, a) => {
                let arg = a.eval_taylor(t, order)?;
                match func {
                    Func::Exp => arg.exp(),
                    Func::Ln => {
                        if arg.value() <= 0.0 {
                            return Err(fail(self));
                        }
                        arg.ln()
                    }
                    Func::Sqrt => {
                        if arg.value() < 0.0 || (arg.value() == 0.0 && order > 0) {
                            return Err(fail(self));
                        }
                        if order == 0 {
                            Taylor::constant(arg.value().sqrt(), 0)
                        } else {
                            arg.powf(0.5)
                        }
                    }
                }
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            ExprAst::Add(..) | ExprAst::Sub(..) => 1,
            ExprAst::Mul(..) | ExprAst::Div(..) => 2,
            ExprAst::Pow(..) => 3,
            ExprAst::Neg(..) => 4,
            ExprAst::Const(_) | ExprAst::Var | ExprAst::Call(..) => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for ExprAst {
    /// Prints text that parses back to the identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precedence();
        let binary = |f: &mut fmt::Formatter<'_>, a: &ExprAst, op: &str, b: &ExprAst| {
            a.write_child(f, p)?;
            write!(f, "{op}")?;
            b.write_child(f, p + 1)
        };
        match self {
            ExprAst::Const(c) => write!(f, "{c}"),
            ExprAst::Var => write!(f, "t"),
            ExprAst::Neg(a) => {
                write!(f, "-")?;
                a.write_child(f, 4)
            }
            ExprAst::Add(a, b) => binary(f, a, "+", b),
            ExprAst::Sub(a, b) => binary(f, a, "-", b),
            ExprAst::Mul(a, b) => binary(f, a, "*", b),
            ExprAst::Div(a, b) => binary(f, a, "/", b),
            ExprAst::Pow(a, r) => {
                a.write_child(f, 4)?;
                write!(f, "^{r}")
            }
            ExprAst::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
