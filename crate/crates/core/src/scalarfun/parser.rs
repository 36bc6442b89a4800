//! Recursive-descent parser for the scalar expression language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := power (('*' | '/') power)*
//! power   := unary ('^' exponent)?
//! unary   := '-' unary | primary
//! primary := number | 't' | func '(' expr ')' | '(' expr ')'
//! exponent:= '-'? number | '(' '-'? number ('/' '-'? number)? ')'
//! ```
//!
//! Unary minus binds tighter than `^`, so `-t^2` is `(-t)^2`.

use crate::error::{Error, Result};

use super::ast::{ExprAst, Func, Rational};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns the next token and the byte offset where it starts.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == '.' {
            let bytes = rest.as_bytes();
            let mut i = 0;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &rest[..i];
            if text == "." {
                return Err(Error::Syntax {
                    offset: start,
                    message: "malformed number".into(),
                });
            }
            self.pos += i;
            return Ok((Tok::Num(text.to_string()), start));
        }
        if c.is_alphabetic() || c == '_' {
            let len: usize = rest
                .chars()
                .take_while(|c| c.is_alphanumeric() || *c == '_')
                .map(char::len_utf8)
                .sum();
            self.pos += len;
            return Ok((Tok::Ident(rest[..len].to_string()), start));
        }
        if "+-*/^()".contains(c) {
            self.pos += 1;
            return Ok((Tok::Sym(c), start));
        }
        Err(Error::Syntax {
            offset: start,
            message: format!("unexpected character `{c}`"),
        })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self> {
        let mut lexer = Lexer { src, pos: 0 };
        let (tok, at) = lexer.next()?;
        Ok(Parser { lexer, tok, at })
    }

    fn bump(&mut self) -> Result<()> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset: self.at,
            message: message.into(),
        })
    }

    fn eat(&mut self, c: char) -> Result<bool> {
        if self.tok == Tok::Sym(c) {
            self.bump()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c)? {
            Ok(())
        } else {
            self.error(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+')? {
                lhs = ExprAst::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-')? {
                lhs = ExprAst::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<ExprAst> {
        let mut lhs = self.power()?;
        loop {
            if self.eat('*')? {
                lhs = ExprAst::Mul(Box::new(lhs), Box::new(self.power()?));
            } else if self.eat('/')? {
                lhs = ExprAst::Div(Box::new(lhs), Box::new(self.power()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn power(&mut self) -> Result<ExprAst> {
        let base = self.unary()?;
        if self.eat('^')? {
            let r = self.exponent()?;
            Ok(ExprAst::Pow(Box::new(base), r))
        } else {
            Ok(base)
        }
    }

    fn unary(&mut self) -> Result<ExprAst> {
        if self.eat('-')? {
            Ok(ExprAst::Neg(Box::new(self.unary()?)))
        } else {
            self.primary()
        }
    }

    fn primary(&mut self) -> Result<ExprAst> {
        match self.tok.clone() {
            Tok::Num(text) => {
                let v: f64 = match text.parse() {
                    Ok(v) => v,
                    Err(_) => return self.error("malformed number"),
                };
                if !v.is_finite() {
                    return self.error("number out of range");
                }
                self.bump()?;
                Ok(ExprAst::Const(v))
            }
            Tok::Ident(name) => {
                let at = self.at;
                if name == "t" {
                    self.bump()?;
                    return Ok(ExprAst::Var);
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(Error::UnknownIdentifier { name, offset: at });
                };
                self.bump()?;
                self.expect('(')?;
                let arg = self.expr()?;
                self.expect(')')?;
                Ok(ExprAst::Call(func, Box::new(arg)))
            }
            Tok::Sym('(') => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::End => self.error("unexpected end of input"),
            Tok::Sym(c) => self.error(format!("unexpected `{c}`")),
        }
    }

    fn signed_literal(&mut self) -> Result<Rational> {
        let negative = self.eat('-')?;
        let Tok::Num(text) = self.tok.clone() else {
            return self.error("exponent must be a rational literal");
        };
        let Some(r) = decimal_to_rational(&text) else {
            return self.error("exponent is not representable as a fraction");
        };
        self.bump()?;
        Ok(if negative {
            Rational { num: -r.num, ..r }
        } else {
            r
        })
    }

    fn exponent(&mut self) -> Result<Rational> {
        if self.eat('(')? {
            let num = self.signed_literal()?;
            let r = if self.eat('/')? {
                let at = self.at;
                let den = self.signed_literal()?;
                num.num
                    .checked_mul(den.den)
                    .zip(num.den.checked_mul(den.num))
                    .and_then(|(a, b)| Rational::new(a, b))
                    .ok_or(Error::Syntax {
                        offset: at,
                        message: "invalid exponent denominator".into(),
                    })?
            } else {
                num
            };
            self.expect(')')?;
            Ok(r)
        } else {
            self.signed_literal()
        }
    }
}

fn decimal_to_rational(text: &str) -> Option<Rational> {
    if text.contains(['e', 'E']) {
        let v: f64 = text.parse().ok()?;
        if v.fract() == 0.0 && v.abs() < 1e15 {
            return Some(Rational::integer(v as i64));
        }
        return None;
    }
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let den = 10i64.checked_pow(frac.len() as u32)?;
    let int_v: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_v: i64 = if frac.is_empty() {
        0
    } else {
        frac.parse().ok()?
    };
    Rational::new(int_v.checked_mul(den)?.checked_add(frac_v)?, den)
}

/// Parses an expression in `t`.
pub fn parse(src: &str) -> Result<ExprAst> {
    let mut p = Parser::new(src)?;
    if p.tok == Tok::End {
        return p.error("empty expression");
    }
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.error("trailing input");
    }
    Ok(e)
}
