use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Atan,
    Abs,
}

impl Func {
    pub const ALL: [Func; 11] =
        [Func::Sin, Func::Cos, Func::Tan, Func::Sinh, Func::Cosh, Func::Tanh, Func::Exp, Func::Log, Func::Sqrt, Func::Atan, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }
}

/// Syntax tree node. Coordinates are referenced by index into the owning
/// expression's coordinate list.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Const(Constant),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

// Binding strength, loosest first.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

impl Node {
    pub fn has_variables(&self) -> bool {
        match self {
            Node::Num(_) | Node::Const(_) => false,
            Node::Var(_) => true,
            Node::Neg(a) | Node::Call(_, a) => a.has_variables(),
            Node::Binary(_, a, b) => a.has_variables() || b.has_variables(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Num(v) if *v < 0.0 || v.is_sign_negative() => PREC_UNARY,
            Node::Num(_) | Node::Const(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
            Node::Neg(_) => PREC_UNARY,
            Node::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_SUM,
            Node::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_PRODUCT,
            Node::Binary(BinOp::Pow, ..) => PREC_POWER,
        }
    }

    pub(crate) fn write(&self, coords: &[String], out: &mut dyn fmt::Write, min_prec: u8) -> fmt::Result {
        let wrap = self.precedence() < min_prec;
        if wrap {
            out.write_char('(')?;
        }
        match self {
            Node::Num(v) => write!(out, "{v}")?,
            Node::Const(c) => out.write_str(c.name())?,
            Node::Var(i) => out.write_str(&coords[*i])?,
            Node::Neg(a) => {
                out.write_char('-')?;
                a.write(coords, out, PREC_UNARY)?;
            }
            Node::Binary(op, a, b) => {
                let (left, right) = match op {
                    BinOp::Add | BinOp::Sub => (PREC_SUM, PREC_PRODUCT),
                    BinOp::Mul | BinOp::Div => (PREC_PRODUCT, PREC_UNARY),
                    BinOp::Pow => (PREC_ATOM, PREC_UNARY),
                };
                a.write(coords, out, left)?;
                match op {
                    BinOp::Pow => out.write_char('^')?,
                    _ => write!(out, " {} ", op.symbol())?,
                }
                b.write(coords, out, right)?;
            }
            Node::Call(f, a) => {
                write!(out, "{}(", f.name())?;
                a.write(coords, out, 0)?;
                out.write_char(')')?;
            }
        }
        if wrap {
            out.write_char(')')?;
        }
        Ok(())
    }
}
