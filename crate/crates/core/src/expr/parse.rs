//! Recursive-descent parser for metric component expressions.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?          right associative
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Error offsets are 1-based byte positions; an error at end of input is
//! reported at `len + 1`.

use thiserror::Error;

use super::ast::{BinOp, Expr, Func, Var};
use crate::chart::ChartKind;

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{kind} at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownIdentifier,
    Arity,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnknownIdentifier => "unknown identifier",
            ParseErrorKind::Arity => "arity mismatch",
        })
    }
}

/// Names and chart context the parser resolves identifiers against.
#[derive(Clone, Debug)]
pub struct Scope<'a> {
    pub n: usize,
    pub chart: ChartKind,
    pub params: &'a [String],
}

impl Scope<'_> {
    fn resolve(&self, name: &str) -> Option<Expr> {
        if self.params.iter().any(|p| p == name) {
            return Some(Expr::Param(name.to_string()));
        }
        if name == "pi" {
            return Some(Expr::Num(std::f64::consts::PI));
        }
        if name == "r" {
            return Some(Expr::Var(Var::R));
        }
        if let Some(idx) = indexed(name, "x") {
            if (1..=self.n).contains(&idx) {
                return Some(Expr::Var(Var::X(idx - 1)));
            }
        }
        if self.chart.is_polar() {
            if name == "phi" {
                return Some(Expr::Var(Var::Phi));
            }
            if let Some(idx) = indexed(name, "theta") {
                if (1..=self.n - 2).contains(&idx) {
                    return Some(Expr::Var(Var::Theta(idx - 1)));
                }
            }
        }
        None
    }
}

fn indexed(name: &str, prefix: &str) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) || rest.starts_with('0') {
        return None;
    }
    rest.parse().ok()
}

pub fn parse(text: &str, scope: &Scope<'_>) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        scope,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(p.error(ParseErrorKind::Syntax, "empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error(ParseErrorKind::Syntax, "unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'s, 'a> {
    src: &'s [u8],
    pos: usize,
    scope: &'a Scope<'a>,
}

impl Parser<'_, '_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, kind: ParseErrorKind, message: &str) -> ParseError {
        self.error_at(self.pos, kind, message)
    }

    fn error_at(&self, pos: usize, kind: ParseErrorKind, message: &str) -> ParseError {
        ParseError {
            offset: pos + 1,
            kind,
            message: message.to_string(),
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            let msg = format!("expected '{}'", c as char);
            Err(self.error(ParseErrorKind::Syntax, &msg))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            let inner = self.unary()?;
            return Ok(Expr::Unary(Func::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error(ParseErrorKind::Syntax, "unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b) if b.is_ascii_digit() || b == b'.' => self.number(),
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => self.identifier(),
            Some(b) => {
                let msg = format!("unexpected character '{}'", b as char);
                Err(self.error(ParseErrorKind::Syntax, &msg))
            }
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(b) if b.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(self.error_at(start, ParseErrorKind::Syntax, "malformed number"));
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.error_at(save, ParseErrorKind::Syntax, "malformed exponent"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let value: f64 = text
            .parse()
            .map_err(|_| self.error_at(start, ParseErrorKind::Syntax, "malformed number"))?;
        if !value.is_finite() {
            return Err(self.error_at(start, ParseErrorKind::Syntax, "numeric literal overflows"));
        }
        Ok(Expr::Num(value))
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            self.expect(b')')?;
            if name == "pow" {
                if args.len() != 2 {
                    let msg = format!("pow takes 2 arguments, got {}", args.len());
                    return Err(self.error_at(start, ParseErrorKind::Arity, &msg));
                }
                let b = args.pop().expect("two args");
                let a = args.pop().expect("two args");
                return Ok(Expr::Binary(BinOp::Pow, Box::new(a), Box::new(b)));
            }
            let Some(func) = Func::from_name(name) else {
                let msg = format!("unknown function `{name}`");
                return Err(self.error_at(start, ParseErrorKind::UnknownIdentifier, &msg));
            };
            if args.len() != 1 {
                let msg = format!("{name} takes 1 argument, got {}", args.len());
                return Err(self.error_at(start, ParseErrorKind::Arity, &msg));
            }
            return Ok(Expr::Unary(func, Box::new(args.pop().expect("one arg"))));
        }
        self.scope.resolve(name).ok_or_else(|| {
            let msg = format!("`{name}` is not a variable or declared parameter");
            self.error_at(start, ParseErrorKind::UnknownIdentifier, &msg)
        })
    }
}
