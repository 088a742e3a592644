//! Tiny arithmetic expressions for profile descriptors in run configs.
//!
//! Grammar (recursive descent):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := '-' factor | primary
//! primary := number | 'r' | name '(' expr (',' expr)? ')' | '(' expr ')'
//! ```
//!
//! Known functions: `sinh`, `cosh`, `exp`, `pow(base, exponent)`. The single
//! free variable is spelled `r` and stands for whatever argument the
//! surrounding evaluator passes (the radius for radial profiles, `cosh r` for
//! weight profiles).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sinh(Box<Expr>),
    Cosh(Box<Expr>),
    Exp(Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expr(format!("trailing input at token {:?}", p.tokens[p.pos])));
        }
        Ok(e)
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => r,
            Expr::Neg(e) => -e.eval(r),
            Expr::Add(a, b) => a.eval(r) + b.eval(r),
            Expr::Sub(a, b) => a.eval(r) - b.eval(r),
            Expr::Mul(a, b) => a.eval(r) * b.eval(r),
            Expr::Div(a, b) => a.eval(r) / b.eval(r),
            Expr::Sinh(e) => e.eval(r).sinh(),
            Expr::Cosh(e) => e.eval(r).cosh(),
            Expr::Exp(e) => e.eval(r).exp(),
            Expr::Pow(a, b) => a.eval(r).powf(b.eval(r)),
        }
    }

    /// Compile into a shareable evaluator closure.
    pub fn compile(text: &str) -> Result<std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        let e = Expr::parse(text)?;
        Ok(std::sync::Arc::new(move |r| e.eval(r)))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => { out.push(Tok::Plus); i += 1; }
            '-' => { out.push(Tok::Minus); i += 1; }
            '*' => { out.push(Tok::Star); i += 1; }
            '/' => { out.push(Tok::Slash); i += 1; }
            '(' => { out.push(Tok::LParen); i += 1; }
            ')' => { out.push(Tok::RParen); i += 1; }
            ',' => { out.push(Tok::Comma); i += 1; }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '+' || chars[i] == '-')
                            && i > start
                            && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| Error::Expr(format!("bad number '{s}'")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Name(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(x) if x == t => Ok(()),
            other => Err(Error::Expr(format!("expected {t:?}, found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    e = Expr::Add(Box::new(e), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.next();
                    e = Expr::Sub(Box::new(e), Box::new(self.term()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    e = Expr::Mul(Box::new(e), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    self.next();
                    e = Expr::Div(Box::new(e), Box::new(self.factor()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Name(name)) => match name.as_str() {
                "r" => Ok(Expr::Var),
                "sinh" | "cosh" | "exp" => {
                    self.expect(Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(match name.as_str() {
                        "sinh" => Expr::Sinh(Box::new(arg)),
                        "cosh" => Expr::Cosh(Box::new(arg)),
                        _ => Expr::Exp(Box::new(arg)),
                    })
                }
                "pow" => {
                    self.expect(Tok::LParen)?;
                    let a = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let b = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Pow(Box::new(a), Box::new(b)))
                }
                other => Err(Error::Expr(format!("unknown name '{other}'"))),
            },
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("r - 1").unwrap();
        assert_eq!(e.eval(1.5), 0.5);
        let e = Expr::parse("pow(sinh(r), -1)").unwrap();
        assert!((e.eval(1.0) - 1.0 / 1.0f64.sinh()).abs() < 1e-15);
        let e = Expr::parse("2 * cosh(r) + exp(-r) / 3").unwrap();
        assert!((e.eval(0.7) - (2.0 * 0.7f64.cosh() + (-0.7f64).exp() / 3.0)).abs() < 1e-15);
        let e = Expr::parse("1e-2 * r").unwrap();
        assert!((e.eval(2.0) - 0.02).abs() < 1e-17);
        let e = Expr::parse("-(r - 2) * (r + 2)").unwrap();
        assert!((e.eval(3.0) + 5.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("r +").is_err());
        assert!(Expr::parse("foo(r)").is_err());
        assert!(Expr::parse("pow(r)").is_err());
        assert!(Expr::parse("r r").is_err());
        assert!(Expr::parse("(r").is_err());
        assert!(Expr::parse("r @ 2").is_err());
    }
}
