//! Coordinate expressions and their second-order jets.
//!
//! Every coordinate function used elsewhere (metric components, potentials,
//! form components, phases) is an [`Expr`] parsed against the chart's
//! ordered coordinate list and evaluated through [`Expr::eval_jet`].

mod ast;
mod jet;
mod parser;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use ast::{BinOp, Constant, Func, Node};
pub use jet::Jet2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` takes {expected} argument(s), found {found} (offset {offset})")]
    Arity { name: String, expected: usize, found: usize, offset: usize },
    #[error("invalid coordinate list: {0}")]
    InvalidCoordinates(String),
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } | ParseError::Arity { offset, .. } => {
                Some(*offset)
            }
            ParseError::InvalidCoordinates(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    LogOfNonPositive,
    SqrtOfNegative,
    DivisionByZero,
    ZeroToNegativePower,
    NegativeBaseNonIntegerPower,
    NonPositiveBaseVariablePower,
    NonFinite,
    PointDimension,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::LogOfNonPositive => "log of non-positive value",
            DomainKind::SqrtOfNegative => "sqrt of negative value",
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::ZeroToNegativePower => "zero raised to a negative power",
            DomainKind::NegativeBaseNonIntegerPower => "negative base with non-integer exponent",
            DomainKind::NonPositiveBaseVariablePower => "non-positive base with variable exponent",
            DomainKind::NonFinite => "non-finite value or derivative",
            DomainKind::PointDimension => "point dimension does not match coordinates",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} in `{node}`")]
pub struct DomainError {
    pub kind: DomainKind,
    /// The offending subexpression, printed.
    pub node: String,
}

/// A parsed expression over a fixed, ordered coordinate list.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    coords: Arc<[String]>,
}

impl Expr {
    pub fn parse<S: AsRef<str>>(source: &str, coords: &[S]) -> Result<Expr, ParseError> {
        let coords: Arc<[String]> = coords.iter().map(|c| c.as_ref().to_string()).collect();
        let root = parser::parse_node(source, &coords)?;
        Ok(Expr { root, coords })
    }

    /// Parse against a shared coordinate list.
    pub fn parse_shared(source: &str, coords: &Arc<[String]>) -> Result<Expr, ParseError> {
        let root = parser::parse_node(source, coords)?;
        Ok(Expr { root, coords: coords.clone() })
    }

    pub fn constant(value: f64, coords: &Arc<[String]>) -> Expr {
        Expr { root: Node::Num(value), coords: coords.clone() }
    }

    pub fn from_node(root: Node, coords: &Arc<[String]>) -> Expr {
        Expr { root, coords: coords.clone() }
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn coords(&self) -> &Arc<[String]> {
        &self.coords
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn has_variables(&self) -> bool {
        self.root.has_variables()
    }

    /// Same tree, different coordinate names (matched by position).
    pub fn rebind(&self, coords: &Arc<[String]>) -> Expr {
        assert_eq!(coords.len(), self.coords.len(), "rebind must preserve dimension");
        Expr { root: self.root.clone(), coords: coords.clone() }
    }

    /// Same tree read over a longer coordinate list whose prefix is ours.
    pub fn extend_coords(&self, coords: &Arc<[String]>) -> Expr {
        assert!(coords.len() >= self.coords.len() && coords[..self.coords.len()] == self.coords[..]);
        Expr { root: self.root.clone(), coords: coords.clone() }
    }

    pub fn apply(func: Func, arg: &Expr) -> Expr {
        Expr { root: Node::Call(func, Box::new(arg.root.clone())), coords: arg.coords.clone() }
    }

    pub fn binary(op: BinOp, lhs: &Expr, rhs: &Expr) -> Expr {
        assert!(Arc::ptr_eq(&lhs.coords, &rhs.coords) || lhs.coords == rhs.coords);
        Expr { root: Node::Binary(op, Box::new(lhs.root.clone()), Box::new(rhs.root.clone())), coords: lhs.coords.clone() }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, DomainError> {
        Ok(self.eval_jet(point, 0)?.value())
    }

    /// Value, gradient and Hessian at `point`, populated up to `order` (0..=2).
    pub fn eval_jet(&self, point: &[f64], order: u8) -> Result<Jet2, DomainError> {
        if point.len() != self.coords.len() {
            return Err(DomainError { kind: DomainKind::PointDimension, node: self.to_string() });
        }
        Evaluator { point, order: order.min(2), coords: &self.coords }.eval(&self.root)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write(&self.coords, f, 0)
    }
}

struct Evaluator<'a> {
    point: &'a [f64],
    order: u8,
    coords: &'a [String],
}

impl Evaluator<'_> {
    fn fail(&self, kind: DomainKind, node: &Node) -> DomainError {
        let mut text = String::new();
        let _ = node.write(self.coords, &mut text, 0);
        DomainError { kind, node: text }
    }

    fn eval(&self, node: &Node) -> Result<Jet2, DomainError> {
        let n = self.point.len();
        let jet = match node {
            Node::Num(v) => Jet2::constant(*v, n, self.order),
            Node::Const(c) => Jet2::constant(c.value(), n, self.order),
            Node::Var(i) => Jet2::variable(self.point[*i], *i, n, self.order),
            Node::Neg(a) => -&self.eval(a)?,
            Node::Binary(op, a, b) => {
                let lhs = self.eval(a)?;
                match op {
                    BinOp::Add => &lhs + &self.eval(b)?,
                    BinOp::Sub => &lhs - &self.eval(b)?,
                    BinOp::Mul => &lhs * &self.eval(b)?,
                    BinOp::Div => {
                        let rhs = self.eval(b)?;
                        if rhs.value() == 0.0 {
                            return Err(self.fail(DomainKind::DivisionByZero, node));
                        }
                        &lhs * &rhs.recip()
                    }
                    BinOp::Pow => self.pow(node, &lhs, b)?,
                }
            }
            Node::Call(func, a) => {
                let arg = self.eval(a)?;
                self.call(node, *func, &arg)?
            }
        };
        if !jet.is_finite() {
            return Err(self.fail(DomainKind::NonFinite, node));
        }
        Ok(jet)
    }

    fn pow(&self, node: &Node, base: &Jet2, exponent: &Node) -> Result<Jet2, DomainError> {
        let a = base.value();
        if exponent.has_variables() {
            if a <= 0.0 {
                return Err(self.fail(DomainKind::NonPositiveBaseVariablePower, node));
            }
            let ln = base.chain(a.ln(), 1.0 / a, -1.0 / (a * a));
            let prod = &ln * &self.eval(exponent)?;
            let e = prod.value().exp();
            return Ok(prod.chain(e, e, e));
        }
        let p = self.eval(exponent)?.value();
        let integral = p.fract() == 0.0 && p.abs() < i32::MAX as f64;
        if a < 0.0 && !integral {
            return Err(self.fail(DomainKind::NegativeBaseNonIntegerPower, node));
        }
        if a == 0.0 && p < 0.0 {
            return Err(self.fail(DomainKind::ZeroToNegativePower, node));
        }
        if integral {
            let k = p as i32;
            let f0 = a.powi(k);
            let f1 = if k == 0 { 0.0 } else { p * a.powi(k - 1) };
            let f2 = if k == 0 || k == 1 { 0.0 } else { p * (p - 1.0) * a.powi(k - 2) };
            Ok(base.chain(f0, f1, f2))
        } else {
            let f1 = if self.order >= 1 { p * a.powf(p - 1.0) } else { 0.0 };
            let f2 = if self.order >= 2 { p * (p - 1.0) * a.powf(p - 2.0) } else { 0.0 };
            Ok(base.chain(a.powf(p), f1, f2))
        }
    }

    fn call(&self, node: &Node, func: Func, arg: &Jet2) -> Result<Jet2, DomainError> {
        let a = arg.value();
        let jet = match func {
            Func::Sin => arg.chain(a.sin(), a.cos(), -a.sin()),
            Func::Cos => arg.chain(a.cos(), -a.sin(), -a.cos()),
            Func::Tan => {
                let t = a.tan();
                let sec2 = 1.0 + t * t;
                arg.chain(t, sec2, 2.0 * t * sec2)
            }
            Func::Sinh => arg.chain(a.sinh(), a.cosh(), a.sinh()),
            Func::Cosh => arg.chain(a.cosh(), a.sinh(), a.cosh()),
            Func::Tanh => {
                let t = a.tanh();
                let sech2 = 1.0 - t * t;
                arg.chain(t, sech2, -2.0 * t * sech2)
            }
            Func::Exp => {
                let e = a.exp();
                arg.chain(e, e, e)
            }
            Func::Log => {
                if a <= 0.0 {
                    return Err(self.fail(DomainKind::LogOfNonPositive, node));
                }
                arg.chain(a.ln(), 1.0 / a, -1.0 / (a * a))
            }
            Func::Sqrt => {
                if a < 0.0 {
                    return Err(self.fail(DomainKind::SqrtOfNegative, node));
                }
                let s = a.sqrt();
                let (f1, f2) = if self.order >= 1 { (0.5 / s, -0.25 / (s * a)) } else { (0.0, 0.0) };
                arg.chain(s, f1, f2)
            }
            Func::Atan => {
                let d = 1.0 / (1.0 + a * a);
                arg.chain(a.atan(), d, -2.0 * a * d * d)
            }
            Func::Abs => {
                let s = if a > 0.0 {
                    1.0
                } else if a < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                arg.chain(a.abs(), s, 0.0)
            }
        };
        Ok(jet)
    }
}
