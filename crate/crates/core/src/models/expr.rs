//! Arithmetic right-hand sides from text.
//!
//! Grammar: `+ − * / ^`, parentheses, `sin cos exp`, numbers, state symbols
//! `x1..xn`, the input `u`, `pi`, and named constants supplied by the caller.
//! `^` is right-associative and binds tighter than unary minus.

use std::collections::BTreeMap;

use super::system::ControlledSystem;
use crate::error::{EtdfError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    State(usize),
    Input,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64], u: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::State(i) => x[*i],
            Expr::Input => u,
            Expr::Neg(a) => -a.eval(x, u),
            Expr::Add(a, b) => a.eval(x, u) + b.eval(x, u),
            Expr::Sub(a, b) => a.eval(x, u) - b.eval(x, u),
            Expr::Mul(a, b) => a.eval(x, u) * b.eval(x, u),
            Expr::Div(a, b) => a.eval(x, u) / b.eval(x, u),
            Expr::Pow(a, b) => {
                let base = a.eval(x, u);
                match **b {
                    Expr::Num(e) if e == e.trunc() && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(x, u)),
                }
            }
            Expr::Sin(a) => a.eval(x, u).sin(),
            Expr::Cos(a) => a.eval(x, u).cos(),
            Expr::Exp(a) => a.eval(x, u).exp(),
        }
    }

    fn max_state(&self) -> Option<usize> {
        match self {
            Expr::State(i) => Some(*i),
            Expr::Num(_) | Expr::Input => None,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.max_state(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_state().max(b.max_state())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| EtdfError::Expression(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(ch) {
            out.push(Tok::Op(ch));
            i += 1;
        } else {
            return Err(EtdfError::Expression(format!("unexpected character '{ch}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    consts: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat_op('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| EtdfError::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat_op(')') {
                    return Err(EtdfError::Expression("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Op(c) => Err(EtdfError::Expression(format!("unexpected '{c}'"))),
            Tok::Ident(name) => {
                if matches!(name.as_str(), "sin" | "cos" | "exp") {
                    if !self.eat_op('(') {
                        return Err(EtdfError::Expression(format!("'{name}' needs an argument in parentheses")));
                    }
                    let arg = Box::new(self.expr()?);
                    if !self.eat_op(')') {
                        return Err(EtdfError::Expression("missing ')'".into()));
                    }
                    return Ok(match name.as_str() {
                        "sin" => Expr::Sin(arg),
                        "cos" => Expr::Cos(arg),
                        _ => Expr::Exp(arg),
                    });
                }
                if name == "u" {
                    return Ok(Expr::Input);
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                if let Some(v) = self.consts.get(&name) {
                    return Ok(Expr::Num(*v));
                }
                if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    if idx >= 1 {
                        return Ok(Expr::State(idx - 1));
                    }
                }
                Err(EtdfError::Expression(format!("unknown symbol '{name}'")))
            }
        }
    }
}

pub fn parse_expr(src: &str, consts: &BTreeMap<String, f64>) -> Result<Expr> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        consts,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(EtdfError::Expression(format!("trailing input in '{src}'")));
    }
    Ok(e)
}

/// System whose components are parsed expressions; Jacobians by finite
/// differences.
#[derive(Clone, Debug)]
pub struct ExprSystem {
    exprs: Vec<Expr>,
    name: String,
}

impl ExprSystem {
    pub fn parse(equations: &[String], consts: &BTreeMap<String, f64>) -> Result<Self> {
        if equations.is_empty() {
            return Err(EtdfError::Expression("no equations given".into()));
        }
        let exprs = equations
            .iter()
            .map(|s| parse_expr(s, consts))
            .collect::<Result<Vec<_>>>()?;
        let n = exprs.len();
        for e in &exprs {
            if let Some(i) = e.max_state() {
                if i >= n {
                    return Err(EtdfError::Expression(format!(
                        "x{} used in a {n}-dimensional system",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self {
            exprs,
            name: "expression".into(),
        })
    }
}

impl ControlledSystem for ExprSystem {
    fn dim(&self) -> usize {
        self.exprs.len()
    }

    fn rhs(&self, x: &[f64], u: f64, out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.exprs) {
            *o = e.eval(x, u);
        }
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::hopf::HopfSystem;

    fn ev(src: &str) -> f64 {
        parse_expr(src, &BTreeMap::new()).unwrap().eval(&[2.0, 3.0], 0.5)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(ev("-x1^2"), -4.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("x1 - x2 - u"), -1.5);
        assert_eq!(ev("1.5e1 + 2E-1"), 15.2);
        assert!((ev("sin(pi/2) + cos(0) + exp(0)") - 3.0).abs() < 1e-15);
    }

    #[test]
    fn errors_are_reported() {
        let c = BTreeMap::new();
        for bad in ["1 +", "sin 2", "(1", "y1", "x0", "2 $ 3", "1 2"] {
            assert!(matches!(parse_expr(bad, &c), Err(EtdfError::Expression(_))), "{bad}");
        }
        let eqs = vec!["x3".to_string(), "x1".to_string()];
        assert!(ExprSystem::parse(&eqs, &c).is_err());
    }

    #[test]
    fn reproduces_hopf_field() {
        let mut c = BTreeMap::new();
        c.insert("p".to_string(), -0.25);
        let eqs = vec![
            "p*x1 - x2 + x1*(x1^2 + x2^2) + u".to_string(),
            "x1 + p*x2 + x2*(x1^2 + x2^2) + u".to_string(),
        ];
        let sys = ExprSystem::parse(&eqs, &c).unwrap();
        let hopf = HopfSystem { p: -0.25 };
        for x in [[0.3, -0.4], [1.1, 0.7]] {
            let a = sys.eval(&x, 0.2);
            let b = hopf.eval(&x, 0.2);
            assert!((a - b).norm() < 1e-15);
            assert!((sys.jacobian_x(&x, 0.2) - hopf.jacobian_x(&x, 0.2)).amax() < 1e-8);
        }
    }
}
