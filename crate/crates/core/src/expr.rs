//! Expression trees over input features: parsed from user formulas for the
//! data generator and built from symbolic networks for rendering.
//!
//! Variables are zero-based in the tree and written one-based (`x1`, `x2`,
//! ...) in text.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::symbolic::Func;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expr {
    Const { value: f64 },
    Var { index: usize },
    Neg { arg: Box<Expr> },
    Add { lhs: Box<Expr>, rhs: Box<Expr> },
    Sub { lhs: Box<Expr>, rhs: Box<Expr> },
    Mul { lhs: Box<Expr>, rhs: Box<Expr> },
    Div { lhs: Box<Expr>, rhs: Box<Expr> },
    Pow { base: Box<Expr>, exp: Box<Expr> },
    Call { func: Func, arg: Box<Expr> },
    /// Value table indexed by the rounded, clamped integer code of `arg`.
    Lookup { arg: Box<Expr>, values: Vec<f64> },
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const { value }
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var { index }
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::Call { func, arg: Box::new(arg) }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const { value } => Some(*value),
            _ => None,
        }
    }

    /// `lhs + rhs`, dropping exact zeros and folding constants.
    pub fn add(lhs: Expr, rhs: Expr) -> Expr {
        match (lhs.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(a), None) if a == 0.0 => rhs,
            (None, Some(b)) if b == 0.0 => lhs,
            _ => Expr::Add { lhs: Box::new(lhs), rhs: Box::new(rhs) },
        }
    }

    /// `k · e`, dropping exact ones and merging nested constant factors.
    pub fn scale(k: f64, e: Expr) -> Expr {
        if k == 1.0 {
            return e;
        }
        match e {
            Expr::Const { value } => Expr::constant(k * value),
            Expr::Mul { lhs, rhs } if lhs.as_const().is_some() => {
                let c = lhs.as_const().unwrap_or(1.0);
                Expr::scale(k * c, *rhs)
            }
            e => Expr::Mul { lhs: Box::new(Expr::constant(k)), rhs: Box::new(e) },
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const { value } => *value,
            Expr::Var { index } => x[*index],
            Expr::Neg { arg } => -arg.eval(x),
            Expr::Add { lhs, rhs } => lhs.eval(x) + rhs.eval(x),
            Expr::Sub { lhs, rhs } => lhs.eval(x) - rhs.eval(x),
            Expr::Mul { lhs, rhs } => lhs.eval(x) * rhs.eval(x),
            Expr::Div { lhs, rhs } => lhs.eval(x) / rhs.eval(x),
            Expr::Pow { base, exp } => {
                let b = base.eval(x);
                match exp.as_const() {
                    Some(e) if e == e.round() && e.abs() <= 64.0 => b.powi(e as i32),
                    _ => b.powf(exp.eval(x)),
                }
            }
            Expr::Call { func, arg } => func.eval(arg.eval(x)),
            Expr::Lookup { arg, values } => {
                if values.is_empty() {
                    return 0.0;
                }
                let r = arg.eval(x).round();
                let i = if r <= 0.0 || r.is_nan() { 0 } else { (r as usize).min(values.len() - 1) };
                values[i]
            }
        }
    }

    /// Largest variable index referenced plus one.
    pub fn arity(&self) -> usize {
        let mut vars = Vec::new();
        self.collect_vars(&mut vars);
        vars.into_iter().max().map_or(0, |m| m + 1)
    }

    /// Sorted distinct variable indices referenced by the tree.
    pub fn variables(&self) -> Vec<usize> {
        let mut vars = Vec::new();
        self.collect_vars(&mut vars);
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    fn collect_vars(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const { .. } => {}
            Expr::Var { index } => out.push(*index),
            Expr::Neg { arg } | Expr::Call { arg, .. } | Expr::Lookup { arg, .. } => arg.collect_vars(out),
            Expr::Add { lhs, rhs } | Expr::Sub { lhs, rhs } | Expr::Mul { lhs, rhs } | Expr::Div { lhs, rhs } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
            Expr::Pow { base, exp } => {
                base.collect_vars(out);
                exp.collect_vars(out);
            }
        }
    }

    /// Renders with `sig` significant figures. `names[i]` names variable `i`
    /// (falls back to `x{i+1}`); `labels[i]`, when non-empty, names the
    /// categories of a looked-up variable.
    pub fn render(&self, names: &[String], labels: &[Vec<String>], sig: usize) -> String {
        let ctx = RenderCtx { names, labels, sig };
        ctx.render(self, 0)
    }
}

struct RenderCtx<'a> {
    names: &'a [String],
    labels: &'a [Vec<String>],
    sig: usize,
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add { .. } | Expr::Sub { .. } => PREC_ADD,
        Expr::Mul { .. } | Expr::Div { .. } => PREC_MUL,
        Expr::Neg { .. } => PREC_NEG,
        Expr::Const { value } if *value < 0.0 => PREC_NEG,
        Expr::Pow { .. } => PREC_POW,
        Expr::Call { func, .. } => match func {
            Func::Square | Func::Cube | Func::Quartic => PREC_POW,
            Func::Reciprocal | Func::InvSquare | Func::InvQuartic | Func::InvSqrt => PREC_MUL,
            _ => PREC_ATOM,
        },
        _ => PREC_ATOM,
    }
}

/// Formats `v` with `sig` significant figures, trimming trailing zeros.
pub fn format_sig(v: f64, sig: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sig = sig.max(1);
    let mag = v.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - mag).max(0) as usize;
    let mut s = format!("{:.*}", decimals, v);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

impl RenderCtx<'_> {
    fn wrap(&self, e: &Expr, min: u8) -> String {
        let s = self.render(e, min);
        if precedence(e) < min {
            format!("({s})")
        } else {
            s
        }
    }

    fn var_name(&self, i: usize) -> String {
        self.names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1))
    }

    fn render(&self, e: &Expr, _min: u8) -> String {
        match e {
            Expr::Const { value } => format_sig(*value, self.sig),
            Expr::Var { index } => self.var_name(*index),
            Expr::Neg { arg } => format!("-{}", self.wrap(arg, PREC_POW)),
            Expr::Add { lhs, rhs } => {
                let l = self.wrap(lhs, PREC_ADD);
                let r = self.wrap(rhs, PREC_ADD);
                match r.strip_prefix('-') {
                    Some(rest) if precedence(rhs) >= PREC_MUL || rhs.as_const().is_some() => {
                        format!("{l} - {rest}")
                    }
                    _ => format!("{l} + {r}"),
                }
            }
            Expr::Sub { lhs, rhs } => {
                format!("{} - {}", self.wrap(lhs, PREC_ADD), self.wrap(rhs, PREC_MUL))
            }
            Expr::Mul { lhs, rhs } => format!("{}*{}", self.wrap(lhs, PREC_MUL), self.wrap(rhs, PREC_NEG)),
            Expr::Div { lhs, rhs } => format!("{}/{}", self.wrap(lhs, PREC_MUL), self.wrap(rhs, PREC_NEG)),
            Expr::Pow { base, exp } => format!("{}^{}", self.wrap(base, PREC_ATOM), self.wrap(exp, PREC_POW)),
            Expr::Call { func, arg } => {
                let inner = self.render(arg, 0);
                let atom = self.wrap(arg, PREC_ATOM);
                match func {
                    Func::Identity => inner,
                    Func::Square => format!("{atom}^2"),
                    Func::Cube => format!("{atom}^3"),
                    Func::Quartic => format!("{atom}^4"),
                    Func::Reciprocal => format!("1/{atom}"),
                    Func::InvSquare => format!("1/{atom}^2"),
                    Func::InvQuartic => format!("1/{atom}^4"),
                    Func::InvSqrt => format!("1/sqrt({inner})"),
                    Func::Gaussian => format!("exp(-{atom}^2)"),
                    f => format!("{}({inner})", f.name()),
                }
            }
            Expr::Lookup { arg, values } => {
                let labels: Option<&Vec<String>> = match arg.as_ref() {
                    Expr::Var { index } => self.labels.get(*index).filter(|l| !l.is_empty()),
                    _ => None,
                };
                let cases: Vec<String> = values
                    .iter()
                    .enumerate()
                    .map(|(code, v)| {
                        let key = labels.and_then(|l| l.get(code)).cloned().unwrap_or_else(|| format!("{code}"));
                        format!("{key}: {}", format_sig(*v, self.sig))
                    })
                    .collect();
                format!("{}[{}]", self.render(arg, 0), cases.join(", "))
            }
        }
    }
}

/// Parses a formula such as `tanh(5*x1) + sin(2*pi*x2) + x3^2`.
pub fn parse(text: &str) -> Result<Expr> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(invalid(format!("unexpected trailing input in formula {text:?}")));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
            let v: f64 = s.parse().map_err(|_| invalid(format!("bad number {s:?}")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Tok::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Tok::RParen);
            i += 1;
        } else {
            return Err(invalid(format!("unexpected character {c:?} in formula")));
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
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Expr::Add { lhs: Box::new(lhs), rhs: Box::new(rhs) }
            } else {
                Expr::Sub { lhs: Box::new(lhs), rhs: Box::new(rhs) }
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Expr::Mul { lhs: Box::new(lhs), rhs: Box::new(rhs) }
            } else {
                Expr::Div { lhs: Box::new(lhs), rhs: Box::new(rhs) }
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg { arg: Box::new(self.unary()?) })
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow { base: Box::new(base), exp: Box::new(exp) });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::constant(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err(invalid("missing closing parenthesis")),
                }
            }
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    let func = Func::from_name(&name).ok_or_else(|| invalid(format!("unknown function {name:?}")))?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    match self.next() {
                        Some(Tok::RParen) => Ok(Expr::call(func, arg)),
                        _ => Err(invalid(format!("missing ')' after {name}("))),
                    }
                } else if name == "pi" {
                    Ok(Expr::constant(core::f64::consts::PI))
                } else if name == "e" {
                    Ok(Expr::constant(core::f64::consts::E))
                } else if let Some(idx) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                    if idx == 0 {
                        return Err(invalid("variables are numbered from x1"));
                    }
                    Ok(Expr::var(idx - 1))
                } else {
                    Err(invalid(format!("unknown identifier {name:?}")))
                }
            }
            Some(t) => Err(invalid(format!("unexpected token {t:?}"))),
            None => Err(invalid("formula ended unexpectedly")),
        }
    }
}
