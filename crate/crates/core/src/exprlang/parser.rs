//! Recursive-descent parser.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' args ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^-1` is accepted.

use super::ast::{BinOp, Constant, Func, Node};
use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Clone, Debug)]
struct Spanned {
    token: Token,
    offset: usize,
}

fn tokenize(source: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
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
            let text = &source[start..i];
            let value =
                text.parse::<f64>().map_err(|_| ParseError::Syntax { offset: start, message: format!("malformed number `{text}`") })?;
            tokens.push(Spanned { token: Token::Num(value), offset: start });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Spanned { token: Token::Ident(source[start..i].to_string()), offset: start });
        } else if b"+-*/^(),".contains(&c) {
            tokens.push(Spanned { token: Token::Sym(c as char), offset: start });
            i += 1;
        } else {
            let ch = source[start..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax { offset: start, message: format!("unexpected character `{ch}`") });
        }
    }
    tokens.push(Spanned { token: Token::End, offset: source.len() });
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Spanned>,
    pos: usize,
    coords: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, sym: char) -> bool {
        if self.peek().token == Token::Sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let t = self.peek();
        let found = match &t.token {
            Token::Num(v) => format!("number {v}"),
            Token::Ident(s) => format!("`{s}`"),
            Token::Sym(c) => format!("`{c}`"),
            Token::End => "end of input".to_string(),
        };
        ParseError::Syntax { offset: t.offset, message: format!("expected {expected}, found {found}") }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Spanned { token, offset } = self.peek().clone();
        match token {
            Token::Num(v) => {
                self.bump();
                Ok(Node::Num(v))
            }
            Token::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.unexpected("`)`"));
                }
                Ok(inner)
            }
            Token::Ident(name) => {
                self.bump();
                let is_call = self.peek().token == Token::Sym('(');
                if let Some(func) = Func::from_name(&name) {
                    if !is_call {
                        return Err(ParseError::Arity { name, expected: 1, found: 0, offset });
                    }
                    self.bump();
                    let mut args = Vec::new();
                    if self.peek().token != Token::Sym(')') {
                        args.push(self.expr()?);
                        while self.eat(',') {
                            args.push(self.expr()?);
                        }
                    }
                    if !self.eat(')') {
                        return Err(self.unexpected("`)` or `,`"));
                    }
                    if args.len() != 1 {
                        return Err(ParseError::Arity { name, expected: 1, found: args.len(), offset });
                    }
                    let arg = args.pop().expect("one argument");
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if let Some(index) = self.coords.iter().position(|c| *c == name) {
                    return Ok(Node::Var(index));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Const(Constant::Pi)),
                    "e" => Ok(Node::Const(Constant::E)),
                    _ => Err(ParseError::UnknownIdentifier { name, offset }),
                }
            }
            _ => Err(self.unexpected("a number, identifier or `(`")),
        }
    }
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_') && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn validate_coordinates(coords: &[String]) -> Result<(), ParseError> {
    for (i, name) in coords.iter().enumerate() {
        if !is_identifier(name) {
            return Err(ParseError::InvalidCoordinates(format!("`{name}` is not a valid identifier")));
        }
        if Func::from_name(name).is_some() {
            return Err(ParseError::InvalidCoordinates(format!("`{name}` collides with a builtin function")));
        }
        if coords[..i].contains(name) {
            return Err(ParseError::InvalidCoordinates(format!("duplicate coordinate `{name}`")));
        }
    }
    Ok(())
}

pub(crate) fn parse_node(source: &str, coords: &[String]) -> Result<Node, ParseError> {
    validate_coordinates(coords)?;
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0, coords };
    if parser.peek().token == Token::End {
        return Err(ParseError::Syntax { offset: parser.peek().offset, message: "empty expression".into() });
    }
    let node = parser.expr()?;
    if parser.peek().token != Token::End {
        return Err(parser.unexpected("an operator or end of input"));
    }
    Ok(node)
}
