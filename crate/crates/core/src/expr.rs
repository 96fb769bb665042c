//! Closed-form scalar expressions over the chart coordinates `x1, x2, x3` and time `t`.
//!
//! The grammar is the usual infix one: `+ - * / ^`, unary minus, parentheses,
//! the functions `sin cos exp sqrt log`, the constant `pi`, and named
//! parameters that are substituted as constants at parse time. `^` binds
//! tighter than unary minus and is right associative, so `-x1^2^3` reads
//! `-(x1^(2^3))`.
//!
//! Expressions are differentiated symbolically; derivative trees are folded
//! as they are built so repeated differentiation stays small.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {message}")]
pub struct ParseError {
    /// 1-based character column of the offending token.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X1,
    X2,
    X3,
    T,
}

impl Var {
    pub const COORDS: [Var; 3] = [Var::X1, Var::X2, Var::X3];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Log,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "log" | "ln" => Func::Log,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Log => v.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str, params: &BTreeMap<String, f64>) -> Result<Expr, ParseError> {
        let tokens = tokenize(src)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            params,
            len: src.chars().count(),
        };
        let e = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError {
                column: tok.column,
                message: format!("unexpected {}", tok.kind.describe()),
            });
        }
        Ok(e)
    }

    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn eval(&self, x: &[f64; 3], t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X1) => x[0],
            Expr::Var(Var::X2) => x[1],
            Expr::Var(Var::X3) => x[2],
            Expr::Var(Var::T) => t,
            Expr::Neg(a) => -a.eval(x, t),
            Expr::Add(a, b) => a.eval(x, t) + b.eval(x, t),
            Expr::Sub(a, b) => a.eval(x, t) - b.eval(x, t),
            Expr::Mul(a, b) => a.eval(x, t) * b.eval(x, t),
            Expr::Div(a, b) => a.eval(x, t) / b.eval(x, t),
            Expr::Pow(a, b) => {
                let base = a.eval(x, t);
                match b.as_ref() {
                    Expr::Const(n) if n.fract() == 0.0 && n.abs() <= 64.0 => base.powi(*n as i32),
                    other => base.powf(other.eval(x, t)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, t)),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(w) => Expr::Const(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(v)),
            Expr::Add(a, b) => add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => add(
                mul(a.diff(v), (**b).clone()),
                mul((**a).clone(), b.diff(v)),
            ),
            Expr::Div(a, b) => {
                let num = sub(
                    mul(a.diff(v), (**b).clone()),
                    mul((**a).clone(), b.diff(v)),
                );
                div(num, pow((**b).clone(), Expr::Const(2.0)))
            }
            Expr::Pow(a, b) => {
                if !b.depends_on(v) {
                    if let Some(n) = b.as_const() {
                        return mul(
                            mul(Expr::Const(n), pow((**a).clone(), Expr::Const(n - 1.0))),
                            a.diff(v),
                        );
                    }
                    // a^b with b free of v but not a literal
                    let exp_m1 = sub((**b).clone(), Expr::Const(1.0));
                    return mul(mul((**b).clone(), pow((**a).clone(), exp_m1)), a.diff(v));
                }
                let log_part = add(
                    mul(b.diff(v), call(Func::Log, (**a).clone())),
                    div(mul((**b).clone(), a.diff(v)), (**a).clone()),
                );
                mul(self.clone(), log_part)
            }
            Expr::Call(f, a) => {
                let inner = a.diff(v);
                if inner.is_zero() {
                    return Expr::Const(0.0);
                }
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Exp => self.clone(),
                    Func::Sqrt => div(Expr::Const(0.5), self.clone()),
                    Func::Log => div(Expr::Const(1.0), (**a).clone()),
                };
                mul(outer, inner)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(Var::X1) => f.write_str("x1"),
            Expr::Var(Var::X2) => f.write_str("x2"),
            Expr::Var(Var::X3) => f.write_str("x3"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

// Folding constructors. Everything that builds trees programmatically goes
// through these.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => match b {
            Expr::Neg(nb) => Expr::Sub(Box::new(a), nb),
            b => Expr::Add(Box::new(a), Box::new(b)),
        },
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x / y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x.powf(y)),
        (_, Some(y)) if y == 0.0 => Expr::Const(1.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    match a.as_const() {
        Some(c) => Expr::Const(f.apply(c)),
        None => Expr::Call(f, Box::new(a)),
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

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier '{s}'"),
            TokenKind::Op(c) => format!("'{c}'"),
            TokenKind::LParen => "'('".into(),
            TokenKind::RParen => "')'".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, only if followed by a digit (optionally signed)
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
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| ParseError {
                column,
                message: format!("malformed number '{text}'"),
            })?;
            out.push(Token {
                kind: TokenKind::Num(v),
                column,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(chars[start..i].iter().collect()),
                column,
            });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            _ => {
                return Err(ParseError {
                    column,
                    message: format!("unexpected character '{c}'"),
                })
            }
        };
        out.push(Token { kind, column });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    params: &'a BTreeMap<String, f64>,
    len: usize,
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

    fn eof_error(&self, what: &str) -> ParseError {
        ParseError {
            column: self.len + 1,
            message: format!("unexpected end of input, expected {what}"),
        }
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

    fn expr(&mut self) -> Result<Expr, ParseError> {
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

    fn term(&mut self) -> Result<Expr, ParseError> {
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

    fn unary(&mut self) -> Result<Expr, ParseError> {
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

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let tok = self.next().ok_or_else(|| self.eof_error("an operand"))?;
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Const(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    match self.next() {
                        Some(Token {
                            kind: TokenKind::LParen,
                            ..
                        }) => {}
                        Some(t) => {
                            return Err(ParseError {
                                column: t.column,
                                message: format!("expected '(' after {name}"),
                            })
                        }
                        None => return Err(self.eof_error("'('")),
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "x1" => Ok(Expr::Var(Var::X1)),
                    "x2" => Ok(Expr::Var(Var::X2)),
                    "x3" => Ok(Expr::Var(Var::X3)),
                    "t" => Ok(Expr::Var(Var::T)),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    other => match self.params.get(other) {
                        Some(v) => Ok(Expr::Const(*v)),
                        None => Err(ParseError {
                            column: tok.column,
                            message: format!("unknown identifier '{other}'"),
                        }),
                    },
                }
            }
            other => Err(ParseError {
                column: tok.column,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => Ok(()),
            Some(t) => Err(ParseError {
                column: t.column,
                message: format!("expected ')', found {}", t.kind.describe()),
            }),
            None => Err(self.eof_error("')'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s, &BTreeMap::new()).unwrap()
    }

    fn ev(s: &str, x: [f64; 3], t: f64) -> f64 {
        p(s).eval(&x, t)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", [0.0; 3], 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", [0.0; 3], 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", [0.0; 3], 0.0), -4.0);
        assert_eq!(ev("(1 - 2) - 3", [0.0; 3], 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", [0.0; 3], 0.0), 1.0);
        assert_eq!(ev("2e-3 * 1E3", [0.0; 3], 0.0), 2.0);
    }

    #[test]
    fn variables_functions_params() {
        let mut params = BTreeMap::new();
        params.insert("amp".to_string(), 0.5);
        let e = Expr::parse("amp * sin(x1) + cos(x2) * exp(x3) - sqrt(t) + pi", &params).unwrap();
        let v = e.eval(&[0.3, 0.4, 0.5], 2.0);
        let want = 0.5 * 0.3f64.sin() + 0.4f64.cos() * 0.5f64.exp() - 2f64.sqrt() + std::f64::consts::PI;
        assert!((v - want).abs() < 1e-15);
        assert!(e.depends_on(Var::T));
        assert!(!p("x1 * x2").depends_on(Var::T));
    }

    #[test]
    fn parse_errors_carry_columns() {
        let err = Expr::parse("x1 + * 2", &BTreeMap::new()).unwrap_err();
        assert_eq!(err.column, 6);
        let err = Expr::parse("sin(x1", &BTreeMap::new()).unwrap_err();
        assert_eq!(err.column, 7);
        let err = Expr::parse("x1 + foo", &BTreeMap::new()).unwrap_err();
        assert_eq!(err.column, 6);
        assert!(err.message.contains("foo"));
        let err = Expr::parse("x1 $ 2", &BTreeMap::new()).unwrap_err();
        assert_eq!(err.column, 4);
        assert!(Expr::parse("x1 x2", &BTreeMap::new()).is_err());
        assert!(Expr::parse("", &BTreeMap::new()).is_err());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let cases = [
            "x1^2 * sin(x2) + x3 / (1 + x1^2)",
            "exp(-x1 * x2) * cos(3 * x3)",
            "sqrt(1 + x1^2 + x2^4) - log(2 + cos(x3))",
            "x1 ^ x2 + (2 + sin(x3)) ^ 0.5",
            "-(x1 - x2) * (x2 - x3) / (3 + x3^2)",
        ];
        let x = [0.7, 1.3, -0.4];
        let h = 1e-5;
        for src in cases {
            let e = p(src);
            for (k, v) in Var::COORDS.iter().enumerate() {
                let d = e.diff(*v).eval(&x, 0.0);
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (e.eval(&xp, 0.0) - e.eval(&xm, 0.0)) / (2.0 * h);
                assert!((d - fd).abs() < 1e-8, "{src} d/dx{}: {d} vs {fd}", k + 1);
            }
        }
    }

    #[test]
    fn folding_keeps_derivatives_small() {
        let e = p("3 * x1");
        assert_eq!(e.diff(Var::X1), Expr::Const(3.0));
        assert_eq!(e.diff(Var::X2), Expr::Const(0.0));
        assert_eq!(p("sin(x2)").diff(Var::X1), Expr::Const(0.0));
    }
}
