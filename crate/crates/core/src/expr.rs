//! A small arithmetic expression language used for potentials, intrinsic
//! fluxes, entropies and initial data.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals, the
//! functions `sin cos exp sqrt ln`, the constant `pi`, and free symbols.
//! Expressions are differentiated symbolically.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character '{ch}' at offset {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected token '{token}' at offset {pos}")]
    UnexpectedToken { token: String, pos: usize },
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("unknown symbol '{symbol}' (allowed: {allowed})")]
    UnknownSymbol { symbol: String, allowed: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Ln,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "ln" | "log" => Func::Ln,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Sqrt => x.sqrt(),
            Func::Ln => x.ln(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }
}

/// Expression tree. Symbols are resolved to slot indices at parse time.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// A parsed expression together with its symbol table.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub expr: Expr,
    symbols: Vec<String>,
}

impl Formula {
    /// Parse `src` allowing only the listed symbols; slot `i` of the
    /// evaluation vector binds `symbols[i]`.
    pub fn parse(src: &str, symbols: &[&str]) -> Result<Self, ExprError> {
        let tokens = tokenize(src)?;
        let table: HashMap<&str, usize> =
            symbols.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            table: &table,
            allowed: symbols.join(", "),
        };
        let expr = parser.expression()?;
        if let Some(tok) = parser.peek() {
            return Err(ExprError::UnexpectedToken {
                token: tok.kind.to_string(),
                pos: tok.pos,
            });
        }
        Ok(Self {
            expr,
            symbols: symbols.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        self.expr.eval(vars)
    }

    /// Symbolic partial derivative with respect to the named symbol.
    pub fn diff(&self, symbol: &str) -> Formula {
        let slot = self.symbols.iter().position(|s| s == symbol);
        let expr = match slot {
            Some(i) => self.expr.diff(i),
            None => Expr::Num(0.0),
        };
        Formula {
            expr,
            symbols: self.symbols.clone(),
        }
    }

    /// True when the expression does not reference `symbol`.
    pub fn is_free_of(&self, symbol: &str) -> bool {
        match self.symbols.iter().position(|s| s == symbol) {
            Some(i) => !self.expr.uses(i),
            None => true,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.write(f, &self.symbols)
    }
}

impl Expr {
    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => {
                let base = a.eval(vars);
                match **b {
                    Expr::Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(vars)),
                }
            }
            Expr::Call(func, a) => func.apply(a.eval(vars)),
        }
    }

    fn uses(&self, slot: usize) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(i) => *i == slot,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses(slot),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses(slot) || b.uses(slot),
        }
    }

    fn diff(&self, slot: usize) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == slot { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(slot)),
            Add(a, b) => add(a.diff(slot), b.diff(slot)),
            Sub(a, b) => sub(a.diff(slot), b.diff(slot)),
            Mul(a, b) => add(
                mul(a.diff(slot), (**b).clone()),
                mul((**a).clone(), b.diff(slot)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.diff(slot), (**b).clone()),
                    mul((**a).clone(), b.diff(slot)),
                ),
                pow((**b).clone(), Num(2.0)),
            ),
            Pow(a, b) => {
                if !b.uses(slot) {
                    // d(a^b) = b a^(b-1) a'
                    mul(
                        mul((**b).clone(), pow((**a).clone(), sub((**b).clone(), Num(1.0)))),
                        a.diff(slot),
                    )
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    mul(
                        self.clone(),
                        add(
                            mul(b.diff(slot), Call(Func::Ln, a.clone())),
                            div(mul((**b).clone(), a.diff(slot)), (**a).clone()),
                        ),
                    )
                }
            }
            Call(func, a) => {
                let inner = a.diff(slot);
                let outer = match func {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Sqrt => div(Num(0.5), self.clone()),
                    Func::Ln => div(Num(1.0), (**a).clone()),
                };
                mul(outer, inner)
            }
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, names: &[String]) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "{}", names[*i]),
            Expr::Neg(a) => {
                write!(f, "(-")?;
                a.write(f, names)?;
                write!(f, ")")
            }
            Expr::Add(a, b) => bin(f, names, a, "+", b),
            Expr::Sub(a, b) => bin(f, names, a, "-", b),
            Expr::Mul(a, b) => bin(f, names, a, "*", b),
            Expr::Div(a, b) => bin(f, names, a, "/", b),
            Expr::Pow(a, b) => bin(f, names, a, "^", b),
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write(f, names)?;
                write!(f, ")")
            }
        }
    }
}

fn bin(f: &mut fmt::Formatter<'_>, names: &[String], a: &Expr, op: &str, b: &Expr) -> fmt::Result {
    write!(f, "(")?;
    a.write(f, names)?;
    write!(f, " {op} ")?;
    b.write(f, names)?;
    write!(f, ")")
}

// Constructors with light constant folding so derivative trees stay small.

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_num(&a, 0.0) => Expr::Num(0.0),
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_num(&b, 0.0) => Expr::Num(1.0),
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "{v}"),
            TokenKind::Ident(s) => write!(f, "{s}"),
            TokenKind::Op(c) => write!(f, "{c}"),
            TokenKind::LParen => write!(f, "("),
            TokenKind::RParen => write!(f, ")"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, ch) = chars[i];
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            // exponent part
            if i < chars.len() && (chars[i].1 == 'e' || chars[i].1 == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = if i < chars.len() { chars[i].0 } else { src.len() };
            let text = &src[chars[start].0..end];
            let value = text
                .parse::<f64>()
                .map_err(|_| ExprError::UnexpectedChar { ch, pos })?;
            out.push(Token {
                kind: TokenKind::Num(value),
                pos,
            });
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let end = if i < chars.len() { chars[i].0 } else { src.len() };
            out.push(Token {
                kind: TokenKind::Ident(src[chars[start].0..end].to_string()),
                pos,
            });
            continue;
        }
        let kind = match ch {
            '+' | '-' | '*' | '/' | '^' => TokenKind::Op(ch),
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            _ => return Err(ExprError::UnexpectedChar { ch, pos }),
        };
        out.push(Token { kind, pos });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    table: &'a HashMap<&'a str, usize>,
    allowed: String,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn expression(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // right associative, binds tighter than unary minus on its left operand
    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let tok = self.next().ok_or(ExprError::UnexpectedEnd)?;
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Num(v)),
            TokenKind::LParen => {
                let e = self.expression()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if let Some(Token {
                    kind: TokenKind::LParen,
                    ..
                }) = self.peek()
                {
                    let func =
                        Func::from_name(&name).ok_or(ExprError::UnknownFunction(name.clone()))?;
                    self.pos += 1;
                    let arg = self.expression()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                match self.table.get(name.as_str()) {
                    Some(&slot) => Ok(Expr::Var(slot)),
                    None => Err(ExprError::UnknownSymbol {
                        symbol: name,
                        allowed: self.allowed.clone(),
                    }),
                }
            }
            other => Err(ExprError::UnexpectedToken {
                token: other.to_string(),
                pos: tok.pos,
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.next() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => Ok(()),
            Some(t) => Err(ExprError::UnexpectedToken {
                token: t.kind.to_string(),
                pos: t.pos,
            }),
            None => Err(ExprError::UnexpectedEnd),
        }
    }
}
