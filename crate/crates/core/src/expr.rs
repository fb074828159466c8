//! Closed-form scalar expressions in `x` and `y`.
//!
//! Grammar (usual precedence, `^` right-associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'x' | 'y' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func  := 'sin' | 'cos' | 'exp' | 'step'
//! ```
//!
//! `step(t)` is 1 for `t > 0` and 0 otherwise. It is meant for piecewise coefficients
//! whose jumps align with mesh facets and cannot be differentiated.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, PartialEq)]
enum Node {
    Const(f64),
    X,
    Y,
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Pow(Expr, Expr),
    Sin(Expr),
    Cos(Expr),
    Exp(Expr),
    Step(Expr),
}

/// Immutable expression tree with shared subtrees.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn node(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    pub fn constant(v: f64) -> Expr {
        Expr::node(Node::Const(v))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn x() -> Expr {
        Expr::node(Node::X)
    }

    pub fn y() -> Expr {
        Expr::node(Node::Y)
    }

    pub fn var(v: Var) -> Expr {
        match v {
            Var::X => Expr::x(),
            Var::Y => Expr::y(),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_constant() == Some(1.0)
    }

    pub fn sin(&self) -> Expr {
        match self.as_constant() {
            Some(v) => Expr::constant(v.sin()),
            None => Expr::node(Node::Sin(self.clone())),
        }
    }

    pub fn cos(&self) -> Expr {
        match self.as_constant() {
            Some(v) => Expr::constant(v.cos()),
            None => Expr::node(Node::Cos(self.clone())),
        }
    }

    pub fn exp(&self) -> Expr {
        match self.as_constant() {
            Some(v) => Expr::constant(v.exp()),
            None => Expr::node(Node::Exp(self.clone())),
        }
    }

    pub fn step(&self) -> Expr {
        match self.as_constant() {
            Some(v) => Expr::constant(step(v)),
            None => Expr::node(Node::Step(self.clone())),
        }
    }

    pub fn pow(&self, e: &Expr) -> Expr {
        match (self.as_constant(), e.as_constant()) {
            (_, Some(k)) if k == 0.0 => Expr::one(),
            (_, Some(k)) if k == 1.0 => self.clone(),
            (Some(a), Some(k)) => Expr::constant(power(a, k)),
            _ => Expr::node(Node::Pow(self.clone(), e.clone())),
        }
    }

    pub fn powi(&self, k: i32) -> Expr {
        self.pow(&Expr::constant(k as f64))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match &*self.0 {
            Node::Const(v) => *v,
            Node::X => x,
            Node::Y => y,
            Node::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Node::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Node::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Node::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Node::Neg(a) => -a.eval(x, y),
            Node::Pow(a, b) => power(a.eval(x, y), b.eval(x, y)),
            Node::Sin(a) => a.eval(x, y).sin(),
            Node::Cos(a) => a.eval(x, y).cos(),
            Node::Exp(a) => a.eval(x, y).exp(),
            Node::Step(a) => step(a.eval(x, y)),
        }
    }

    pub fn eval_at(&self, p: [f64; 2]) -> f64 {
        self.eval(p[0], p[1])
    }

    /// Exact partial derivative. Fails on `step` and on powers whose exponent depends
    /// on `x` or `y`.
    pub fn diff(&self, v: Var) -> Result<Expr> {
        Ok(match &*self.0 {
            Node::Const(_) => Expr::zero(),
            Node::X => Expr::constant(if v == Var::X { 1.0 } else { 0.0 }),
            Node::Y => Expr::constant(if v == Var::Y { 1.0 } else { 0.0 }),
            Node::Add(a, b) => a.diff(v)? + b.diff(v)?,
            Node::Sub(a, b) => a.diff(v)? - b.diff(v)?,
            Node::Mul(a, b) => a.diff(v)? * b.clone() + a.clone() * b.diff(v)?,
            Node::Div(a, b) => {
                (a.diff(v)? * b.clone() - a.clone() * b.diff(v)?) / (b.clone() * b.clone())
            }
            Node::Neg(a) => -a.diff(v)?,
            Node::Pow(a, b) => {
                let k = b.as_constant().ok_or_else(|| {
                    Error::NotDifferentiable(format!("non-constant exponent in {self}"))
                })?;
                Expr::constant(k) * a.pow(&Expr::constant(k - 1.0)) * a.diff(v)?
            }
            Node::Sin(a) => a.cos() * a.diff(v)?,
            Node::Cos(a) => -(a.sin()) * a.diff(v)?,
            Node::Exp(a) => self.clone() * a.diff(v)?,
            Node::Step(_) => return Err(Error::NotDifferentiable(self.to_string())),
        })
    }

    pub fn gradient(&self) -> Result<[Expr; 2]> {
        Ok([self.diff(Var::X)?, self.diff(Var::Y)?])
    }

    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }
}

fn step(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn power(a: f64, k: f64) -> f64 {
    if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 {
        a.powi(k as i32)
    } else {
        a.powf(k)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(a), _) if a == 0.0 => rhs,
            (_, Some(b)) if b == 0.0 => self,
            _ => Expr::node(Node::Add(self, rhs)),
        }
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a - b),
            (Some(a), _) if a == 0.0 => -rhs,
            (_, Some(b)) if b == 0.0 => self,
            _ => Expr::node(Node::Sub(self, rhs)),
        }
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        if self.is_zero() || rhs.is_zero() {
            return Expr::zero();
        }
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a * b),
            _ if self.is_one() => rhs,
            _ if rhs.is_one() => self,
            _ => Expr::node(Node::Mul(self, rhs)),
        }
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (self.as_constant(), rhs.as_constant()) {
            (Some(a), Some(b)) => Expr::constant(a / b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            _ if rhs.is_one() => self,
            _ => Expr::node(Node::Div(self, rhs)),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match &*self.0 {
            Node::Const(v) => Expr::constant(-v),
            Node::Neg(a) => a.clone(),
            _ => Expr::node(Node::Neg(self)),
        }
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::constant(v)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Node::X => f.write_str("x"),
            Node::Y => f.write_str("y"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "{a}*{b}"),
            Node::Div(a, b) => write!(f, "{a}/({b})"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Pow(a, b) => write!(f, "({a})^({b})"),
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Step(a) => write!(f, "step({a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.term()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs * self.unary()?;
            } else if self.eat(b'/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            let e = self.unary()?;
            return Ok(base.pow(&e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match name {
                    "x" => Ok(Expr::x()),
                    "y" => Ok(Expr::y()),
                    "pi" => Ok(Expr::constant(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" | "step" => {
                        if !self.eat(b'(') {
                            return Err(self.error("expected '(' after function name"));
                        }
                        let arg = self.expr()?;
                        if !self.eat(b')') {
                            return Err(self.error("expected ')'"));
                        }
                        Ok(match name {
                            "sin" => arg.sin(),
                            "cos" => arg.cos(),
                            "exp" => arg.exp(),
                            _ => arg.step(),
                        })
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier '{name}'")))
                    }
                }
            }
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Expr::constant).map_err(|_| Error::Parse {
            pos: start,
            msg: format!("invalid number '{text}'"),
        })
    }
}
